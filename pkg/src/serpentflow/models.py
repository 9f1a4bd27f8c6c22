"""Trainable networks: a time-conditioned U-Net velocity field and a domain classifier.

Both work on batches of 1D fields ``(B, N)`` or 2D fields ``(B, H, W)``; the
channel axis is added internally.
"""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .numerics import io as sfio
from .numerics.adam import AdamState, adam_step
from .numerics.rng import make_rng
from .numerics.tensor import (
    Tensor,
    as_tensor,
    avg_pool,
    bce_with_logits,
    concat,
    conv,
    linear,
    mul,
    add,
    no_grad,
    relu,
    reshape,
    silu,
    transpose,
    tmean,
    upsample,
)


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class UNetConfig:
    dim: int = 1
    width: int = 16
    kernel: int = 3
    emb_dim: int = 32
    hidden: int = 64

    @property
    def channels(self) -> tuple[int, int]:
        return self.width, 2 * self.width


@dataclass(frozen=True)
class ClassifierConfig:
    dim: int = 1
    width: int = 8
    kernel: int = 3


def _he(rng, shape, fan_in) -> np.ndarray:
    return rng.standard_normal(shape) * math.sqrt(2.0 / fan_in)


class _Module:
    kind = ""

    def __init__(self):
        self.params: dict[str, Tensor] = {}

    def _add(self, name: str, value: np.ndarray) -> Tensor:
        t = Tensor(value, requires_grad=True, name=name)
        self.params[name] = t
        return t

    def parameters(self) -> dict[str, Tensor]:
        return self.params

    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        if list(state) != list(self.params):
            raise CheckpointError("parameter names do not match the architecture")
        for k, v in state.items():
            if v.shape != self.params[k].shape:
                raise CheckpointError(f"{k}: shape {v.shape} != expected {self.params[k].shape}")
            self.params[k].data = np.array(v, dtype=np.float64)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def _conv(self, name: str, x, padding: int) -> Tensor:
        return conv(x, self.params[f"{name}.w"], self.params[f"{name}.b"], padding=padding,
                    layout="CN")

    def _make_conv(self, rng, name: str, cin: int, cout: int, k: int, dim: int, zero=False):
        shape = (cout, cin) + (k,) * dim
        w = np.zeros(shape) if zero else _he(rng, shape, cin * k ** dim)
        self._add(f"{name}.w", w)
        self._add(f"{name}.b", np.zeros(cout))


class VelocityUNet(_Module):
    """Two-level encoder/decoder with skip concatenation and FiLM time conditioning.

    The output convolution starts at zero, so an untrained model is the
    identity transport.
    """

    kind = "velocity"
    blocks = ("enc0", "enc1", "mid", "dec1", "dec0")

    def __init__(self, config: UNetConfig = UNetConfig(), seed: int = 0):
        super().__init__()
        self.config = config
        rng = make_rng(seed, "init", "velocity")
        c0, c1 = config.channels
        k, d, hid = config.kernel, config.dim, config.hidden
        self._add("temb.0.w", _he(rng, (hid, config.emb_dim), config.emb_dim))
        self._add("temb.0.b", np.zeros(hid))
        self._add("temb.1.w", _he(rng, (hid, hid), hid))
        self._add("temb.1.b", np.zeros(hid))
        io = {"enc0": (1, c0), "enc1": (c0, c1), "mid": (c1, c1),
              "dec1": (2 * c1, c1), "dec0": (c1 + c0, c0)}
        for name, (cin, cout) in io.items():
            self._make_conv(rng, name, cin, cout, k, d)
            self._add(f"{name}.film.w", rng.standard_normal((2 * cout, hid)) * 0.02)
            self._add(f"{name}.film.b", np.zeros(2 * cout))
        self._make_conv(rng, "out", c0, 1, k, d, zero=True)

    def time_embedding(self, t: np.ndarray) -> np.ndarray:
        half = self.config.emb_dim // 2
        freqs = np.exp(np.linspace(0.0, math.log(1000.0), half))
        ang = t[:, None] * freqs[None, :]
        return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)

    def _film(self, name: str, h: Tensor, temb: Tensor) -> Tensor:
        c = h.shape[0]
        ss = linear(temb, self.params[f"{name}.film.w"], self.params[f"{name}.film.b"])
        tail = (1,) * (h.ndim - 2)
        scale = reshape(transpose(ss[:, :c]), (c, h.shape[1]) + tail)
        shift = reshape(transpose(ss[:, c:]), (c, h.shape[1]) + tail)
        return add(mul(h, add(scale, 1.0)), shift)

    def __call__(self, x, t) -> Tensor:
        x = as_tensor(x)
        d = self.config.dim
        if x.ndim != d + 1:
            raise ValueError(f"expected a batch of {d}D fields, got shape {x.shape}")
        if any(n % 4 for n in x.shape[1:]):
            raise ValueError(f"field shape {x.shape[1:]} must be divisible by 4")
        t = np.broadcast_to(np.asarray(t, dtype=np.float64), (x.shape[0],))
        if np.any(t < 0.0) or np.any(t > 1.0) or not np.all(np.isfinite(t)):
            raise ValueError("time values must lie in [0, 1]")
        p = self.params
        pad = self.config.kernel // 2
        emb = Tensor(self.time_embedding(t))
        temb = silu(linear(silu(linear(emb, p["temb.0.w"], p["temb.0.b"])),
                           p["temb.1.w"], p["temb.1.b"]))

        def block(name, h):
            return silu(self._film(name, self._conv(name, h, pad), temb))

        # activations are kept channel-major: (channels, batch, *spatial)
        h = reshape(x, (1,) + x.shape)
        e0 = block("enc0", h)
        e1 = block("enc1", avg_pool(e0))
        m = block("mid", avg_pool(e1))
        u1 = block("dec1", concat([upsample(m), e1], axis=0))
        u0 = block("dec0", concat([upsample(u1), e0], axis=0))
        out = self._conv("out", u0, pad)
        return reshape(out, x.shape)

    def velocity(self, x: np.ndarray, t) -> np.ndarray:
        """Gradient-free evaluation used by the ODE solvers."""
        with no_grad():
            return self(x, t).data


class DomainClassifier(_Module):
    """Three conv blocks with 2x average pooling, global average, linear logit."""

    kind = "classifier"

    def __init__(self, config: ClassifierConfig = ClassifierConfig(), seed: int = 0):
        super().__init__()
        self.config = config
        rng = make_rng(seed, "init", "classifier")
        w, k, d = config.width, config.kernel, config.dim
        for name, (cin, cout) in {"c0": (1, w), "c1": (w, 2 * w), "c2": (2 * w, 2 * w)}.items():
            self._make_conv(rng, name, cin, cout, k, d)
        self._add("head.w", rng.standard_normal((1, 2 * w)) * math.sqrt(1.0 / (2 * w)))
        self._add("head.b", np.zeros(1))

    def __call__(self, x) -> Tensor:
        x = as_tensor(x)
        d = self.config.dim
        if x.ndim != d + 1:
            raise ValueError(f"expected a batch of {d}D fields, got shape {x.shape}")
        pad = self.config.kernel // 2
        h = reshape(x, (1,) + x.shape)
        for name in ("c0", "c1", "c2"):
            h = avg_pool(relu(self._conv(name, h, pad)))
        pooled = transpose(tmean(h, axis=tuple(range(2, 2 + d))))
        logit = linear(pooled, self.params["head.w"], self.params["head.b"])
        return reshape(logit, (x.shape[0],))


def classifier_loss(logits: Tensor, labels) -> Tensor:
    return bce_with_logits(logits, np.asarray(labels, dtype=np.float64))


def predict_logits(model: DomainClassifier, x: np.ndarray, batch: int = 256) -> np.ndarray:
    with no_grad():
        return np.concatenate([model(x[i:i + batch]).data for i in range(0, len(x), batch)])


def fit_classifier(model: DomainClassifier, x: np.ndarray, y: np.ndarray, steps: int = 500,
                   lr: float = 1e-3, batch_size: int = 32, seed: int = 0) -> list[float]:
    """Minibatch Adam on the binary cross-entropy; returns the loss per step."""
    rng = make_rng(seed, "classifier", "batches")
    state = AdamState(learning_rate=lr)
    params = model.parameters()
    n = len(x)
    order = rng.permutation(n)
    pos = 0
    losses = []
    for _ in range(steps):
        if pos + batch_size > n:
            order = rng.permutation(n)
            pos = 0
        idx = order[pos:pos + batch_size]
        pos += batch_size
        model.zero_grad()
        loss = classifier_loss(model(x[idx]), y[idx])
        loss.backward()
        adam_step(state, params, {k: p.grad for k, p in params.items()})
        losses.append(loss.item())
    return losses


# -- checkpoints -----------------------------------------------------------------------
def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def _parse(v: str):
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def save_checkpoint(path, model: _Module, **meta) -> Path:
    """Write ``manifest.txt`` plus one SFTENSOR blob per parameter, in order."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    arch = {"kind": model.kind, **asdict(model.config), **meta}
    lines = [" ".join(f"{k}={_fmt(v)}" for k, v in arch.items())]
    for name, p in model.params.items():
        fname = f"{name}.sft"
        sfio.write_tensor(path / fname, p.data)
        lines.append(f"{name} {fname} {'x'.join(map(str, p.shape))}")
    (path / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_manifest(path) -> dict:
    head = (Path(path) / "manifest.txt").read_text(encoding="utf-8").splitlines()[0]
    return {k: _parse(v) for k, v in (item.split("=", 1) for item in head.split())}


def load_checkpoint(path):
    """Rebuild a model from a checkpoint directory; returns ``(model, meta)``."""
    path = Path(path)
    if not (path / "manifest.txt").is_file():
        raise CheckpointError(f"no checkpoint manifest in {path}")
    lines = (path / "manifest.txt").read_text(encoding="utf-8").splitlines()
    meta = read_manifest(path)
    kind = meta.pop("kind")
    cls, cfg_cls = {"velocity": (VelocityUNet, UNetConfig),
                    "classifier": (DomainClassifier, ClassifierConfig)}[kind]
    names = {f.name for f in fields(cfg_cls)}
    cfg = cfg_cls(**{k: meta.pop(k) for k in list(meta) if k in names})
    model = cls(cfg)
    state = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        name, fname, shape = line.split()
        arr = sfio.read_tensor(path / fname)
        expected = tuple(int(s) for s in shape.split("x"))
        if arr.shape != expected:
            raise CheckpointError(f"{name}: stored shape {arr.shape} != manifest {expected}")
        state[name] = arr
    model.load_state_dict(state)
    return model, meta


def checkpoint_exists(path) -> bool:
    return os.path.isfile(os.path.join(path, "manifest.txt"))
