"""Discrete Fourier analysis, radial cutoff masks and pseudo-pair construction.

Conventions used throughout the package:

* forward transform unnormalised, inverse scaled by ``1/N`` (``1/(H*W)`` in 2D),
  so ``sum |X|^2 == N * sum |x|^2``;
* coefficient ``k`` along an axis of length ``n`` carries the signed bin
  ``xi = ((k + n//2) % n) - n//2``, i.e. ``xi`` in ``{-n//2, ..., ceil(n/2)-1}``;
* the shared band is ``||xi||_2 < cutoff`` (strict), the specific band its
  complement.

Every function takes a ``d`` argument giving how many trailing axes form one
field (1 for time series, 2 for images); leading axes are batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics.rng import make_rng

REAL_TOL = 1e-9


@dataclass
class Field:
    """A real sample on a regular grid (values are (N,) or (H, W))."""

    values: np.ndarray
    sample_rate: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim not in (1, 2):
            raise ValueError(f"field must be 1D or 2D, got shape {self.values.shape}")
        if min(self.values.shape) < 4:
            raise ValueError(f"field dimensions must be >= 4, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def dim(self) -> int:
        return self.values.ndim


@dataclass
class SpectralMask:
    mask: np.ndarray
    cutoff: float

    @property
    def complement(self) -> np.ndarray:
        return ~self.mask


@dataclass
class PseudoPair:
    pseudo_input: np.ndarray
    target: np.ndarray
    cutoff: float
    noise_seed: int | None
    noise: np.ndarray = field(repr=False, default=None)


def _resolve_d(x: np.ndarray, d: int | None) -> int:
    if d is None:
        if x.ndim not in (1, 2):
            raise ValueError(f"pass d explicitly for batched input of shape {x.shape}")
        return x.ndim
    if d not in (1, 2) or x.ndim < d:
        raise ValueError(f"invalid field dimensionality d={d} for shape {x.shape}")
    return d


# -- transforms ---------------------------------------------------------------------
def _bit_reverse(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _fft_last(x: np.ndarray, inverse: bool) -> np.ndarray:
    """Unnormalised transform along the last axis (sign +1 when ``inverse``)."""
    n = x.shape[-1]
    if n & (n - 1):
        return _dft_last(x, inverse)
    sign = 1.0 if inverse else -1.0
    y = np.asarray(x, dtype=np.complex128)[..., _bit_reverse(n)]
    lead = y.shape[:-1]
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(sign * 2j * np.pi * np.arange(half) / size)
        y = y.reshape(lead + (n // size, size))
        even = y[..., :half]
        odd = y[..., half:] * tw
        y = np.concatenate([even + odd, even - odd], axis=-1)
        size *= 2
    return y.reshape(lead + (n,))


def _dft_last(x: np.ndarray, inverse: bool) -> np.ndarray:
    n = x.shape[-1]
    k = np.arange(n)
    sign = 1.0 if inverse else -1.0
    kernel = np.exp(sign * 2j * np.pi * (np.outer(k, k) % n) / n)
    return np.asarray(x, dtype=np.complex128) @ kernel.T


def _apply(x: np.ndarray, d: int, inverse: bool, last) -> np.ndarray:
    y = np.asarray(x)
    for axis in range(-1, -d - 1, -1):
        y = np.swapaxes(last(np.swapaxes(y, axis, -1), inverse), axis, -1)
    if inverse:
        y = y / np.prod(x.shape[-d:])
    return y


def dft_forward(x, d: int | None = None) -> np.ndarray:
    """Radix-2 FFT over the trailing ``d`` axes (direct sum for other sizes)."""
    x = np.asarray(x)
    return _apply(x, _resolve_d(x, d), False, _fft_last)


def dft_inverse(z, d: int | None = None) -> np.ndarray:
    """Inverse transform including the ``1/N`` factor; returns complex values."""
    z = np.asarray(z)
    return _apply(z, _resolve_d(z, d), True, _fft_last)


def dft_direct(x, d: int | None = None, inverse: bool = False) -> np.ndarray:
    """O(N^2) direct-sum transform, kept independent of the FFT path."""
    x = np.asarray(x)
    return _apply(x, _resolve_d(x, d), inverse, _dft_last)


def to_real(z: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Drop the imaginary residue of a Hermitian-filtered inverse transform."""
    resid = float(np.max(np.abs(z.imag))) if z.size else 0.0
    if resid > REAL_TOL * max(1.0, scale):
        raise FloatingPointError(f"imaginary residue {resid:.3e} exceeds tolerance")
    return np.ascontiguousarray(z.real)


# -- masks ----------------------------------------------------------------------------
def signed_bins(n: int) -> np.ndarray:
    return (np.arange(n) + n // 2) % n - n // 2


def frequency_radius(shape) -> np.ndarray:
    """Euclidean norm of the signed bin vector for every coefficient."""
    grids = np.meshgrid(*[signed_bins(n) for n in shape], indexing="ij")
    return np.sqrt(sum(g.astype(np.float64) ** 2 for g in grids))


def nyquist_radius(shape) -> float:
    return float(np.sqrt(sum((n // 2) ** 2 for n in shape)))


def radial_mask(shape, cutoff: float) -> SpectralMask:
    """Boolean mask of the shared band ``||xi|| < cutoff`` for a field shape."""
    if cutoff < 0 or not np.isfinite(cutoff):
        raise ValueError(f"cutoff must be a non-negative finite number, got {cutoff}")
    shape = tuple(int(n) for n in shape)
    return SpectralMask(frequency_radius(shape) < cutoff, float(cutoff))


def _filter(x: np.ndarray, mask: np.ndarray, d: int) -> np.ndarray:
    if mask.all():
        return np.array(x, dtype=np.float64)
    if not mask.any():
        return np.zeros(x.shape)
    z = dft_inverse(dft_forward(x, d) * mask, d)
    return to_real(z, float(np.max(np.abs(x))) if x.size else 1.0)


def lowpass(x, cutoff: float, d: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    d = _resolve_d(x, d)
    return _filter(x, radial_mask(x.shape[-d:], cutoff).mask, d)


def highpass(x, cutoff: float, d: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    d = _resolve_d(x, d)
    return _filter(x, ~radial_mask(x.shape[-d:], cutoff).mask, d)


def pseudo_input(x: np.ndarray, noise: np.ndarray, cutoff: float, d: int) -> np.ndarray:
    """Keep the shared band of ``x`` and take the specific band from ``noise``."""
    mask = radial_mask(x.shape[-d:], cutoff).mask
    if mask.all():
        return np.array(x, dtype=np.float64)
    if not mask.any():
        return np.array(noise, dtype=np.float64)
    # noise + L(x - noise) has low band L(x) and high band H(noise)
    return noise + _filter(x - noise, mask, d)


def make_pseudo(x, cutoff: float, seed: int | None = None, d: int | None = None,
                noise: np.ndarray | None = None, noise_scale: float = 1.0) -> PseudoPair:
    """Build a pseudo-pair whose pseudo-input shares ``x``'s low band.

    The noise is drawn per element as a standard normal in signal space from
    ``seed`` unless an explicit ``noise`` array is supplied.  ``noise_scale=0``
    gives the zero-noise variant (the plain low-passed field).
    """
    x = np.asarray(x, dtype=np.float64)
    d = _resolve_d(x, d)
    if noise is None:
        if seed is None:
            raise ValueError("either seed or noise must be given")
        noise = make_rng(seed, "pseudo").standard_normal(x.shape)
    noise = np.asarray(noise, dtype=np.float64) * noise_scale
    if noise.shape != x.shape:
        raise ValueError(f"noise shape {noise.shape} does not match field shape {x.shape}")
    return PseudoPair(pseudo_input(x, noise, cutoff, d), x, float(cutoff), seed, noise)
