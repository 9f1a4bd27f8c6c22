"""Evaluation metrics: distributional, spectral, temporal, spatial and classifier-based."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import spectral
from .cutoff import SweepConfig, classifier_accuracy


def ks(sample_1, sample_2) -> float:
    """Two-sample Kolmogorov-Smirnov statistic via a sorted-merge sweep."""
    a = np.sort(np.asarray(sample_1, dtype=np.float64).ravel())
    b = np.sort(np.asarray(sample_2, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    # evaluate both empirical CDFs just after every distinct value
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def nse(prediction, reference) -> float:
    p = np.asarray(prediction, dtype=np.float64).ravel()
    r = np.asarray(reference, dtype=np.float64).ravel()
    if p.shape != r.shape or r.size < 2:
        raise ValueError("series must have equal length >= 2")
    denom = float(np.sum((r - r.mean()) ** 2))
    if denom == 0.0:
        raise ValueError("reference series is constant; NSE is undefined")
    return 1.0 - float(np.sum((p - r) ** 2)) / denom


def spatial_mean_series(fields: np.ndarray, standardize: bool = True) -> np.ndarray:
    """Reduce a (T, ...) field sequence to its spatial mean, optionally z-scored."""
    fields = np.asarray(fields, dtype=np.float64)
    s = fields.reshape(len(fields), -1).mean(axis=1) if fields.ndim > 1 else fields
    if standardize:
        sd = s.std()
        s = (s - s.mean()) / sd if sd > 0 else s - s.mean()
    return s


def temporal_rmse(series_1, series_2, standardize: bool = True) -> float:
    s1 = spatial_mean_series(series_1, standardize)
    s2 = spatial_mean_series(series_2, standardize)
    if s1.shape != s2.shape:
        raise ValueError(f"length mismatch {s1.shape} vs {s2.shape}")
    return float(np.sqrt(np.mean((s1 - s2) ** 2)))


@dataclass
class PowerSpectrum:
    radius: np.ndarray
    power: np.ndarray
    counts: np.ndarray

    def total(self) -> float:
        return float(np.sum(self.power * self.counts))


def psd(x, d: int | None = None) -> PowerSpectrum:
    """``|X|^2 / N`` binned by integer radius ``floor(||xi||)`` and averaged per bin.

    Batched input is averaged over the leading axes.  With this scaling
    ``sum(power * counts) == ||x||^2`` for a single field.
    """
    x = np.asarray(x, dtype=np.float64)
    d = spectral._resolve_d(x, d)
    shape = x.shape[-d:]
    n = int(np.prod(shape))
    p = np.abs(spectral.dft_forward(x, d)) ** 2 / n
    p = p.reshape((-1,) + shape).mean(axis=0)
    bins = np.floor(spectral.frequency_radius(shape) + 1e-9).astype(np.int64).ravel()
    counts = np.bincount(bins)
    sums = np.bincount(bins, weights=p.ravel())
    keep = counts > 0
    return PowerSpectrum(np.nonzero(keep)[0].astype(np.float64), sums[keep] / counts[keep],
                         counts[keep])


def band_power(x, cutoff: float, d: int | None = None) -> float:
    """Mean per-bin power over bins at or above ``cutoff``."""
    spec = psd(x, d)
    sel = spec.radius >= cutoff
    return float(np.mean(spec.power[sel])) if sel.any() else 0.0


def band_power_ratio(output, target, cutoff: float, d: int | None = None) -> float:
    """Output/target ratio of the power averaged over bins at or above the cutoff.

    Averaging before dividing keeps near-empty target bins (line spectra) from
    dominating the score.
    """
    po, pt = psd(output, d), psd(target, d)
    if not np.array_equal(po.radius, pt.radius):
        raise ValueError("output and target have different spectral grids")
    sel = po.radius >= cutoff
    denom = float(np.mean(pt.power[sel])) if sel.any() else 0.0
    if denom <= 0.0:
        raise ValueError("target has no power above the cutoff")
    return float(np.mean(po.power[sel])) / denom


def per_bin_ratio(output, target, cutoff: float, d: int | None = None) -> float:
    """Mean of per-bin output/target ratios above the cutoff (diagnostic)."""
    po, pt = psd(output, d), psd(target, d)
    sel = (po.radius >= cutoff) & (pt.power > 0)
    return float(np.mean(po.power[sel] / pt.power[sel]))


@dataclass
class CorrelationMap:
    values: np.ndarray
    zero_variance: int


def correlation_map(fields, point: tuple[int, ...]) -> CorrelationMap:
    """Pearson correlation of every pixel's series with the series at ``point``.

    Pixels with zero variance get correlation 0 and are counted.
    """
    f = np.asarray(fields, dtype=np.float64)
    if len(f) < 3:
        raise ValueError("need a sequence of at least 3 fields")
    try:
        ref = f[(slice(None),) + tuple(point)]
    except IndexError:
        raise ValueError(f"reference point {point} outside grid {f.shape[1:]}") from None
    c = f - f.mean(axis=0)
    r = ref - ref.mean()
    sd = np.sqrt(np.sum(c ** 2, axis=0))
    sr = math.sqrt(float(np.sum(r ** 2)))
    num = np.tensordot(r, c, axes=(0, 0))
    bad = (sd == 0) | (sr == 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.where(bad, 0.0, num / (sd * sr))
    return CorrelationMap(np.clip(corr, -1.0, 1.0), int(np.count_nonzero(bad)))


def default_points(shape: tuple[int, ...], count: int = 8) -> list[tuple[int, ...]]:
    """``count`` points spread evenly over the flattened grid interior."""
    size = int(np.prod(shape))
    flat = np.linspace(0, size - 1, count + 2)[1:-1].round().astype(int)
    return [tuple(int(i) for i in np.unravel_index(k, shape)) for k in flat]


def correlation_score(fields_method, fields_reference,
                      points: Sequence[tuple[int, ...]] | None = None) -> float:
    """Mean absolute difference of correlation maps over the reference points."""
    fm = np.asarray(fields_method, dtype=np.float64)
    fr = np.asarray(fields_reference, dtype=np.float64)
    if fm.shape[1:] != fr.shape[1:]:
        raise ValueError("grids differ")
    if points is None:
        points = default_points(fm.shape[1:])
    diffs = [np.mean(np.abs(correlation_map(fm, p).values - correlation_map(fr, p).values))
             for p in points]
    return float(np.mean(diffs))


def realism_accuracy(generated, target, seed: int = 0, cfg: SweepConfig | None = None) -> float:
    """Held-out accuracy of a fresh classifier separating generated from target."""
    cfg = cfg or SweepConfig(seed=seed)
    gen = np.asarray(generated, dtype=np.float64)
    tgt = np.asarray(target, dtype=np.float64)
    _, acc = classifier_accuracy(gen, tgt, cfg, seed=seed, split_seed=seed)
    return acc


def cdf_curve(sample, points: int = 512) -> tuple[np.ndarray, np.ndarray]:
    """Empirical quantiles at ``points`` evenly spaced probabilities."""
    s = np.asarray(sample, dtype=np.float64).ravel()
    if s.size == 0:
        raise ValueError("empty sample")
    probs = (np.arange(points) + 0.5) / points
    return np.quantile(s, probs), probs


@dataclass
class MetricReport:
    scalars: dict[str, float] = field(default_factory=dict)
    curves: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def add(self, name: str, value: float) -> None:
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"metric {name} is not finite")
        self.scalars[name] = value

    def write(self, directory) -> None:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["name,value"] + [f"{k},{v!r}" for k, v in self.scalars.items()]
        (out / "summary.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        for name, (xs, ys) in self.curves.items():
            rows = ["x,y"] + [f"{float(a)!r},{float(b)!r}" for a, b in zip(xs, ys)]
            (out / f"{name}.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
