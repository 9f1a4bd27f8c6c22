"""Dense float64 tensors with reverse-mode differentiation.

Every primitive below computes its forward value with numpy and, when any
input requires gradients (and recording is enabled), attaches a closure that
maps the output cotangent to input cotangents.  ``Tensor.backward`` builds a
:class:`Tape` (the reverse topological order of the recorded graph) and replays
it once.
"""

from __future__ import annotations

import contextlib
import math
from itertools import product
from typing import Callable, Iterable, Sequence

import numpy as np

_RECORDING = True


class ShapeError(ValueError):
    """Raised when the operands of a primitive have incompatible shapes."""


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference / integration)."""
    global _RECORDING
    prev = _RECORDING
    _RECORDING = False
    try:
        yield
    finally:
        _RECORDING = prev


def is_recording() -> bool:
    return _RECORDING


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None
        self.op = "leaf"

    # -- basic introspection ------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _not_scalar(self)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self.op}{tag}, requires_grad={self.requires_grad})"

    # -- operators ----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent: float):
        return power(self, exponent)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims: bool = False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    @property
    def T(self):
        return transpose(self)

    def backward(self, grad: np.ndarray | None = None) -> None:
        backward(self, grad)


def _not_scalar(t: Tensor):
    raise ShapeError(f"item: tensor of shape {t.shape} is not a scalar")


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, parents: Sequence[Tensor], backward_fn: Callable, op: str) -> Tensor:
    out = Tensor(data)
    out.op = op
    if _RECORDING and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _broadcast_shape(op: str, a: tuple, b: tuple) -> tuple:
    try:
        return np.broadcast_shapes(a, b)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a} and {b}") from None


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- tape ----------------------------------------------------------------------
class Tape:
    """Reverse-ordered record of the operations reachable from a root tensor."""

    def __init__(self, root: Tensor):
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.nodes = order[::-1]

    def __len__(self) -> int:
        return len(self.nodes)

    def replay(self, root: Tensor, seed_grad: np.ndarray) -> None:
        grads: dict[int, np.ndarray] = {id(root): seed_grad}
        for node in self.nodes:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                prev = grads.get(id(parent))
                grads[id(parent)] = pg if prev is None else prev + pg


def backward(loss: Tensor, grad: np.ndarray | None = None) -> None:
    if grad is None:
        if loss.size != 1:
            raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
        grad = np.ones_like(loss.data)
    if not loss.requires_grad:
        return
    Tape(loss).replay(loss, np.asarray(grad, dtype=np.float64))


# -- elementwise ----------------------------------------------------------------
def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a.shape, b.shape)
    return _result(a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a.shape, b.shape)
    return _result(a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a.shape, b.shape)
    return _result(a.data * b.data, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
                   "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("div", a.shape, b.shape)
    out = a.data / b.data
    return _result(out, (a, b),
                   lambda g: (_unbroadcast(g / b.data, a.shape),
                              _unbroadcast(-g * out / b.data, b.shape)), "div")


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _result(-a.data, (a,), lambda g: (-g,), "neg")


def power(a, exponent: float) -> Tensor:
    a = as_tensor(a)
    p = float(exponent)
    return _result(a.data ** p, (a,), lambda g: (g * p * a.data ** (p - 1.0),), "pow")


def square(a) -> Tensor:
    a = as_tensor(a)
    return _result(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,), "square")


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _result(out, (a,), lambda g: (g * out,), "exp")


def log(a) -> Tensor:
    a = as_tensor(a)
    return _result(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _result(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # 0.5 * (1 + tanh(x / 2)) never overflows
    s = np.multiply(x, 0.5)
    np.tanh(s, out=s)
    s += 1.0
    s *= 0.5
    return s


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = _sigmoid(a.data)
    return _result(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _result(np.maximum(a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def silu(a) -> Tensor:
    a = as_tensor(a)
    s = _sigmoid(a.data)

    def bw(g):
        d = 1.0 - s
        d *= a.data
        d += 1.0
        d *= s
        d *= g
        return (d,)

    return _result(a.data * s, (a,), bw, "silu")


# -- reductions and shape -----------------------------------------------------
def _norm_axes(axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _result(out, (a,), bw, "sum")


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    n = math.prod(a.shape[i] for i in axes)
    out = a.data.mean(axis=axes, keepdims=keepdims)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / n, a.shape).copy(),)

    return _result(out, (a,), bw, "mean")


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {a.shape} into {tuple(shape)}") from None
    return _result(out, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a, axes: Sequence[int] | None = None) -> Tensor:
    a = as_tensor(a)
    axes = tuple(reversed(range(a.ndim))) if axes is None else tuple(axes)
    inv = tuple(np.argsort(axes))
    return _result(a.data.transpose(axes), (a,), lambda g: (g.transpose(inv),), "transpose")


def getitem(a, index) -> Tensor:
    a = as_tensor(a)

    def bw(g):
        full = np.zeros(a.shape)
        np.add.at(full, index, g)
        return (full,)

    return _result(a.data[index], (a,), bw, "getitem")


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    ref = ts[0].shape
    ax = axis % len(ref)
    for t in ts[1:]:
        if len(t.shape) != len(ref) or any(
            i != ax and m != n for i, (m, n) in enumerate(zip(t.shape, ref))
        ):
            raise ShapeError(f"concat: incompatible shapes {ref} and {t.shape} along axis {axis}")
    sizes = [t.shape[ax] for t in ts]
    splits = np.cumsum(sizes)[:-1]
    return _result(np.concatenate([t.data for t in ts], axis=ax), ts,
                   lambda g: tuple(np.split(g, splits, axis=ax)), "concat")


# -- linear algebra -------------------------------------------------------------
def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    return _result(a.data @ b.data, (a, b),
                   lambda g: (g @ b.data.T, a.data.T @ g), "matmul")


def linear(x, weight, bias=None) -> Tensor:
    """``x @ weight.T + bias`` with ``weight`` of shape (out, in)."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"linear: incompatible shapes {x.shape} and {weight.shape}")
    out = x.data @ weight.data.T
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (weight.shape[0],):
            raise ShapeError(f"linear: bias shape {bias.shape} does not match {weight.shape}")
        out = out + bias.data
        parents.append(bias)

    def bw(g):
        grads = [g @ weight.data, g.T @ x.data]
        if bias is not None:
            grads.append(g.sum(axis=0))
        return tuple(grads)

    return _result(out, parents, bw, "linear")


# -- convolution ------------------------------------------------------------------
def _tuple(v, n: int) -> tuple[int, ...]:
    return tuple(v) if isinstance(v, (tuple, list)) else (int(v),) * n


def conv(x, weight, bias=None, stride=1, padding=0, layout: str = "NC") -> Tensor:
    """1D or 2D cross-correlation.

    ``weight`` is (out_ch, in_ch, *kernel).  With ``layout="NC"`` the input is
    (batch, in_ch, *spatial); ``layout="CN"`` takes (in_ch, batch, *spatial) and
    returns the same layout, which skips two transposes per call.
    Implemented as an im2col matrix product; the column matrix is kept for the
    backward pass.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if layout not in ("NC", "CN"):
        raise ValueError(f"unknown layout {layout!r}")
    nd = x.ndim - 2
    cin_axis = 1 if layout == "NC" else 0
    if nd not in (1, 2) or weight.ndim != nd + 2 or weight.shape[1] != x.shape[cin_axis]:
        raise ShapeError(f"conv: incompatible shapes {x.shape} and {weight.shape}")
    stride = _tuple(stride, nd)
    pad = _tuple(padding, nd)
    ksize = weight.shape[2:]
    xd = x.data if layout == "CN" else x.data.swapaxes(0, 1)
    C, B = xd.shape[:2]
    O = weight.shape[0]
    if any(pad):
        xp = np.zeros((C, B) + tuple(n + 2 * p for n, p in zip(xd.shape[2:], pad)))
        xp[(slice(None), slice(None)) + tuple(slice(p, p + n) for p, n in zip(pad, xd.shape[2:]))] = xd
    else:
        xp = xd
    out_sp = tuple((n - k) // s + 1 for n, k, s in zip(xp.shape[2:], ksize, stride))
    if any(n <= 0 for n in out_sp):
        raise ShapeError(f"conv: kernel {ksize} larger than padded input {xp.shape[2:]}")
    offsets = list(product(*[range(k) for k in ksize]))
    nk = len(offsets)

    def window(off):
        return (slice(None), slice(None)) + tuple(
            slice(o, o + s * (n - 1) + 1, s) for o, s, n in zip(off, stride, out_sp)
        )

    cols = np.empty((C, nk, B) + out_sp)
    for i, off in enumerate(offsets):
        cols[:, i] = xp[window(off)]
    cols = cols.reshape(C * nk, -1)
    w2 = weight.data.reshape(O, C * nk)
    out = w2 @ cols
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (O,):
            raise ShapeError(f"conv: bias shape {bias.shape} does not match {O} channels")
        out += bias.data[:, None]
    out = out.reshape((O, B) + out_sp)
    if layout == "NC":
        out = np.ascontiguousarray(out.swapaxes(0, 1))
    parents = [x, weight] + ([bias] if bias is not None else [])

    def bw(g):
        g2 = (g if layout == "CN" else g.swapaxes(0, 1)).reshape(O, -1)
        gw = (g2 @ cols.T).reshape(weight.shape)
        gx = None
        if x.requires_grad:
            gcols = (w2.T @ g2).reshape((C, nk, B) + out_sp)
            gxp = np.zeros(xp.shape)
            for i, off in enumerate(offsets):
                gxp[window(off)] += gcols[:, i]
            inner = (slice(None), slice(None)) + tuple(
                slice(p, n - p) for p, n in zip(pad, xp.shape[2:])
            )
            gx = gxp[inner]
            if layout == "NC":
                gx = gx.swapaxes(0, 1)
        grads = [gx, gw]
        if bias is not None:
            grads.append(g2.sum(axis=1))
        return tuple(grads)

    return _result(out, parents, bw, "conv")


def avg_pool(x, factor: int = 2) -> Tensor:
    """Non-overlapping average pooling over every spatial axis."""
    x = as_tensor(x)
    nd = x.ndim - 2
    sp = x.shape[2:]
    if any(n % factor for n in sp):
        raise ShapeError(f"avg_pool: spatial shape {sp} not divisible by {factor}")
    split = x.shape[:2] + tuple(v for n in sp for v in (n // factor, factor))
    axes = tuple(3 + 2 * i for i in range(nd))
    # strided slice sums are much faster than a reshaped mean
    out = x.data
    for ax in range(2, 2 + nd):
        idx = [slice(None)] * out.ndim
        parts = []
        for k in range(factor):
            idx[ax] = slice(k, None, factor)
            parts.append(out[tuple(idx)])
        out = sum(parts[1:], parts[0].copy())
    out *= 1.0 / factor ** nd

    def bw(g):
        g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / factor ** nd, split).reshape(x.shape).copy(),)

    return _result(out, (x,), bw, "avg_pool")


def upsample(x, factor: int = 2) -> Tensor:
    """Nearest-neighbour upsampling over every spatial axis."""
    x = as_tensor(x)
    nd = x.ndim - 2
    out = x.data
    for ax in range(2, 2 + nd):
        out = np.repeat(out, factor, axis=ax)
    split = x.shape[:2] + tuple(v for n in x.shape[2:] for v in (n, factor))
    axes = tuple(3 + 2 * i for i in range(nd))
    return _result(out, (x,), lambda g: (g.reshape(split).sum(axis=axes),), "upsample")


# -- losses -----------------------------------------------------------------------
def mse_loss(pred, target) -> Tensor:
    """Mean of squared differences over every element."""
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss: incompatible shapes {pred.shape} and {target.shape}")
    diff = pred.data - target.data
    n = diff.size
    return _result(np.asarray(np.mean(diff * diff)), (pred, target),
                   lambda g: (2.0 * g * diff / n, -2.0 * g * diff / n), "mse")


def bce_with_logits(logits, labels) -> Tensor:
    """Binary cross-entropy averaged over the batch, in log-sum-exp form."""
    logits = as_tensor(logits)
    y = np.asarray(labels.data if isinstance(labels, Tensor) else labels, dtype=np.float64)
    if logits.shape != y.shape:
        raise ShapeError(f"bce_with_logits: incompatible shapes {logits.shape} and {y.shape}")
    lg = logits.data
    per = np.maximum(lg, 0.0) - lg * y + np.log1p(np.exp(-np.abs(lg)))
    n = lg.size
    return _result(np.asarray(per.mean()), (logits,),
                   lambda g: (g * (_sigmoid(lg) - y) / n,), "bce")


def parameters_of(tensors: Iterable[Tensor]) -> list[Tensor]:
    return [t for t in tensors if t.requires_grad]
