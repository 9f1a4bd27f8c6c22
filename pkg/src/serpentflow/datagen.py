"""Synthetic datasets with known ground truth.

* a degraded-sensor time series: a clean signal sampled at 512 Hz and a cheap
  version of it (analog low-pass, decimation, noise, per-segment quantisation,
  spectral upsampling back to the dense grid);
* 2D Gaussian random fields with a power-law spectrum and an optional ring of
  extra power, plus a low-passed variant for the source domain.

The 2D generator is a statistical stand-in only; it does not simulate any
physical system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from . import spectral
from .numerics.rng import make_rng


# -- time series ------------------------------------------------------------------------
@dataclass(frozen=True)
class SignalSpec:
    n_low: int = 4
    n_high: int = 6
    low_band: tuple[float, float] = (0.5, 20.0)
    high_band: tuple[float, float] = (30.0, 256.0)
    amplitude: tuple[float, float] = (0.5, 1.5)
    sample_rate: int = 512
    noise_std: float = 0.02
    segment: int = 512
    duration: int = 2 ** 17

    def __post_init__(self):
        lo, hi = self.low_band
        hlo, hhi = self.high_band
        if not (0 <= lo <= hi and 0 <= hlo <= hhi):
            raise ValueError("frequency ranges must be ordered")
        if hhi > self.sample_rate / 2:
            raise ValueError("high band exceeds the Nyquist frequency")
        if self.sample_rate % 2:
            raise ValueError("sample_rate must be even")
        if self.segment < 4 or self.segment & (self.segment - 1):
            raise ValueError("segment length must be a power of two")
        if min(self.n_low, self.n_high) < 0 or self.noise_std < 0:
            raise ValueError("component counts and noise must be non-negative")
        if self.duration < self.segment:
            raise ValueError("duration shorter than one segment")


@dataclass(frozen=True)
class DegradationSpec:
    cutoff_hz: float = 50.0
    factor: int = 10
    noise_std: float = 0.01
    bits: int = 4

    def __post_init__(self):
        if self.cutoff_hz <= 0 or self.factor < 1 or self.bits < 1 or self.noise_std < 0:
            raise ValueError(f"invalid degradation spec {self}")


@dataclass(frozen=True)
class Tones:
    amplitudes: np.ndarray
    freqs: np.ndarray
    phases: np.ndarray

    def __call__(self, t: np.ndarray) -> np.ndarray:
        out = np.zeros_like(t)
        for a, f, p in zip(self.amplitudes, self.freqs, self.phases):
            out += a * np.sin(2 * np.pi * f * t + p)
        return out


@dataclass
class TimeSeries:
    values: np.ndarray
    sample_rate: int
    low: Tones
    high: Tones
    envelope: np.ndarray


def envelope(x_low: np.ndarray) -> np.ndarray:
    """Min-max normalised copy of ``x_low``; 0.5 everywhere if it is constant."""
    lo, hi = float(np.min(x_low)), float(np.max(x_low))
    if hi == lo:
        return np.full_like(x_low, 0.5)
    return (x_low - lo) / (hi - lo)


def compose(t: np.ndarray, low: Tones, high: Tones, noise: np.ndarray | None = None):
    """``x_low + m * sum(high tones) + noise`` with ``m = 0.3 + 0.7 * envelope``."""
    x_low = low(t)
    env = envelope(x_low)
    x = x_low + (0.3 + 0.7 * env) * high(t)
    if noise is not None:
        x = x + noise
    return x, env


def gen_timeseries(spec: SignalSpec, seed: int) -> TimeSeries:
    rng = make_rng(seed, "timeseries")
    amp_lo, amp_hi = spec.amplitude
    low = Tones(rng.uniform(amp_lo, amp_hi, spec.n_low),
                rng.uniform(*spec.low_band, spec.n_low),
                rng.uniform(0, 2 * np.pi, spec.n_low))
    high = Tones(np.ones(spec.n_high),
                 rng.uniform(*spec.high_band, spec.n_high),
                 rng.uniform(0, 2 * np.pi, spec.n_high))
    t = np.arange(spec.duration) / spec.sample_rate
    noise = rng.normal(0.0, spec.noise_std, spec.duration) if spec.noise_std else None
    x, env = compose(t, low, high, noise)
    return TimeSeries(x, spec.sample_rate, low, high, env)


def analog_lowpass(x: np.ndarray, cutoff_hz: float, sample_rate: float) -> np.ndarray:
    """Single-pole IIR ``y[n] = y[n-1] + a (x[n] - y[n-1])``, started at ``x[0]``."""
    dt = 1.0 / sample_rate
    rc = 1.0 / (2 * np.pi * cutoff_hz)
    a = dt / (rc + dt)
    y, _ = lfilter([a], [1.0, a - 1.0], x, zi=[(1.0 - a) * x[0]])
    return y


def quantize(x: np.ndarray, bits: int) -> np.ndarray:
    """Midtread uniform quantiser spanning ``[min(x), max(x)]`` with ``2**bits`` levels."""
    lo, hi = float(np.min(x)), float(np.max(x))
    if hi == lo:
        return np.array(x, dtype=np.float64)
    step = (hi - lo) / (2 ** bits - 1)
    return lo + np.round((x - lo) / step) * step


def upsample_fft(sparse: np.ndarray, factor: int, length: int) -> np.ndarray:
    """Band-limited interpolation by zero-padding the spectrum, cut to ``length``."""
    n = len(sparse)
    full = n * factor
    spec = np.fft.rfft(sparse)
    if n % 2 == 0:
        spec[-1] *= 0.5  # split the Nyquist bin between +/- frequencies
    padded = np.zeros(full // 2 + 1, dtype=np.complex128)
    padded[:len(spec)] = spec * factor
    return np.fft.irfft(padded, n=full)[:length]


def degrade(x: np.ndarray, spec: DegradationSpec, seed: int, sample_rate: float = 512,
            segment: int = 512) -> tuple[np.ndarray, np.ndarray]:
    """Cheap-sensor forward model; returns ``(sparse, dense)``.

    Quantisation ranges are taken per dense segment: sparse sample ``i`` belongs
    to segment ``k`` when ``k*segment <= i*factor < (k+1)*segment``.
    """
    x = np.asarray(x, dtype=np.float64)
    filtered = analog_lowpass(x, spec.cutoff_hz, sample_rate)
    sparse = filtered[::spec.factor].copy()
    if spec.noise_std:
        sparse += make_rng(seed, "degrade").normal(0.0, spec.noise_std, sparse.shape)
    owner = (np.arange(len(sparse)) * spec.factor) // segment
    for k in np.unique(owner):
        sel = owner == k
        sparse[sel] = quantize(sparse[sel], spec.bits)
    return sparse, upsample_fft(sparse, spec.factor, len(x))


def segments(x: np.ndarray, n: int) -> np.ndarray:
    count = len(x) // n
    return np.asarray(x[:count * n], dtype=np.float64).reshape(count, n)


@dataclass
class UnpairedSplit:
    domain_a: np.ndarray
    domain_b: np.ndarray
    ids_a: np.ndarray
    ids_b: np.ndarray
    hidden_truth: np.ndarray  # clean segments aligned with domain_a; evaluation only


def split_unpaired(precise: np.ndarray, cheap_dense: np.ndarray, n: int, m: int | None = None
                   ) -> UnpairedSplit:
    """Source = first ``m`` cheap segments, target = precise segments from ``m`` on."""
    if len(precise) != len(cheap_dense):
        raise ValueError("both recordings must have the same length")
    total = len(precise) // n
    if m is None:
        m = total // 2
    if m < 1:
        raise ValueError("m must be >= 1; m = 0 would leave the domains paired")
    if 2 * m > total:
        raise ValueError(f"need at least {2 * m} segments of length {n}, have {total}")
    cheap = segments(cheap_dense, n)
    clean = segments(precise, n)
    ids_a, ids_b = np.arange(m), np.arange(m, total)
    assert not set(ids_a) & set(ids_b)
    return UnpairedSplit(cheap[ids_a], clean[ids_b], ids_a, ids_b, clean[ids_a])


# -- 2D random fields --------------------------------------------------------------------
@dataclass(frozen=True)
class FieldSpec:
    """Isotropic spectrum ``(1 + r)^-slope + bump * exp(-(r - k)^2 / (2 width^2))``."""

    shape: tuple[int, int] = (64, 64)
    slope: float = 2.0
    peak: float = 0.0
    bump: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        if self.peak >= spectral.nyquist_radius(self.shape):
            raise ValueError("peak wavenumber must lie below the Nyquist radius")
        if self.bump < 0 or self.width <= 0:
            raise ValueError("bump weight must be >= 0 and width > 0")

    def power(self) -> np.ndarray:
        r = spectral.frequency_radius(self.shape)
        p = (1.0 + r) ** -self.slope
        if self.bump:
            p = p + self.bump * np.exp(-((r - self.peak) ** 2) / (2 * self.width ** 2))
        return p / p.mean()  # unit pixel variance


def gen_fields_2d(spec: FieldSpec, seed: int, count: int, cutoff: float | None = None
                  ) -> np.ndarray:
    """``count`` independent fields; low-passed at ``cutoff`` when given."""
    white = make_rng(seed, "fields2d").standard_normal((count,) + tuple(spec.shape))
    gain = np.sqrt(spec.power())
    if cutoff is not None:
        gain = gain * spectral.radial_mask(spec.shape, cutoff).mask
    z = spectral.dft_forward(white, 2) * gain
    return spectral.to_real(spectral.dft_inverse(z, 2), math.sqrt(float(np.max(spec.power()))))
