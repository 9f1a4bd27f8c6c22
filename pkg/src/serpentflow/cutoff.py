"""Cutoff selection by a descending sweep of domain-classifier accuracies.

For every candidate both domains are low-passed and a fresh classifier is
trained to tell them apart.  The selected cutoff is the first (largest)
candidate whose held-out accuracy drops to the threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import spectral
from .models import ClassifierConfig, DomainClassifier, fit_classifier, predict_logits
from .numerics.rng import make_rng


@dataclass(frozen=True)
class SweepConfig:
    threshold: float = 0.55
    heldout: float = 0.25
    steps: int = 500
    lr: float = 1e-3
    batch_size: int = 32
    width: int = 8
    seed: int = 0
    stop_early: bool = False

    def __post_init__(self):
        if not 0.5 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0.5, 1)")
        if not 0.0 < self.heldout < 1.0:
            raise ValueError("heldout fraction must lie in (0, 1)")


@dataclass(frozen=True)
class SweepEntry:
    candidate: float
    train_acc: float
    heldout_acc: float


@dataclass
class CutoffSweepResult:
    entries: list[SweepEntry]
    selected: float | None
    sanity_accuracy: float
    threshold: float
    label: str = "omega_c"

    @property
    def found(self) -> bool:
        return self.selected is not None

    @property
    def candidates(self) -> list[float]:
        return [e.candidate for e in self.entries]

    @property
    def heldout(self) -> np.ndarray:
        return np.array([e.heldout_acc for e in self.entries])

    def to_csv(self) -> str:
        rows = [f"{self.label},train_acc,heldout_acc"]
        rows += [f"{e.candidate!r},{e.train_acc!r},{e.heldout_acc!r}" for e in self.entries]
        sel = "none" if self.selected is None else repr(self.selected)
        rows.append(f"# selected={sel} sanity_acc={self.sanity_accuracy!r} "
                    f"threshold={self.threshold!r}")
        return "\n".join(rows) + "\n"

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def default_candidates(shape) -> list[float]:
    """Integer bins from the Nyquist radius down to 1."""
    top = int(math.floor(spectral.nyquist_radius(shape)))
    return [float(c) for c in range(top, 0, -1)]


def _split(n_a: int, n_b: int, heldout: float, seed: int):
    rng = make_rng(seed, "sweep", "split")
    masks = []
    for n in (n_a, n_b):
        test = np.zeros(n, dtype=bool)
        test[rng.permutation(n)[:max(1, int(round(heldout * n)))]] = True
        masks.append(test)
    return masks


def _accuracy(model, x, y) -> float:
    return float(np.mean((predict_logits(model, x) > 0) == (y > 0.5)))


def classifier_accuracy(domain_a: np.ndarray, domain_b: np.ndarray, cfg: SweepConfig,
                        seed: int, split_seed: int | None = None) -> tuple[float, float]:
    """Train a fresh classifier (A -> 0, B -> 1); returns ``(train_acc, heldout_acc)``."""
    if len(domain_a) == 0 or len(domain_b) == 0:
        raise ValueError("both datasets must be nonempty")
    if domain_a.shape[1:] != domain_b.shape[1:]:
        raise ValueError(f"grid mismatch {domain_a.shape[1:]} vs {domain_b.shape[1:]}")
    test_a, test_b = _split(len(domain_a), len(domain_b), cfg.heldout,
                            cfg.seed if split_seed is None else split_seed)
    x = np.concatenate([domain_a, domain_b])
    y = np.concatenate([np.zeros(len(domain_a)), np.ones(len(domain_b))])
    test = np.concatenate([test_a, test_b])
    model = DomainClassifier(ClassifierConfig(dim=x.ndim - 1, width=cfg.width), seed=seed)
    fit_classifier(model, x[~test], y[~test], steps=cfg.steps, lr=cfg.lr,
                   batch_size=cfg.batch_size, seed=seed)
    return _accuracy(model, x[~test], y[~test]), _accuracy(model, x[test], y[test])


def _member_seed(seed: int, *labels) -> int:
    return int(make_rng(seed, "sweep", *labels).integers(2 ** 31))


def sweep_transform(domain_a: np.ndarray, domain_b: np.ndarray, candidates: Sequence[float],
                    transform: Callable[[np.ndarray, float, str], np.ndarray],
                    cfg: SweepConfig = SweepConfig(), label: str = "omega_c",
                    log: Callable[[str], None] | None = None) -> CutoffSweepResult:
    """Generic descending sweep; ``transform(x, candidate, domain)`` prepares each set."""
    candidates = [float(c) for c in candidates]
    if not candidates:
        raise ValueError("no candidates given")
    if any(b >= a for a, b in zip(candidates, candidates[1:])):
        raise ValueError("candidates must be strictly decreasing")
    domain_a = np.asarray(domain_a, dtype=np.float64)
    domain_b = np.asarray(domain_b, dtype=np.float64)
    _, sanity = classifier_accuracy(domain_a, domain_b, cfg, _member_seed(cfg.seed, "sanity"))
    entries: list[SweepEntry] = []
    selected = None
    for i, c in enumerate(candidates):
        tr, te = classifier_accuracy(transform(domain_a, c, "a"), transform(domain_b, c, "b"),
                                     cfg, _member_seed(cfg.seed, i))
        entries.append(SweepEntry(c, tr, te))
        if log:
            log(f"{label}={c:g} train_acc={tr:.3f} heldout_acc={te:.3f}")
        if selected is None and te <= cfg.threshold:
            selected = c
            if cfg.stop_early:
                break
    return CutoffSweepResult(entries, selected, sanity, cfg.threshold, label)


def sweep(domain_a: np.ndarray, domain_b: np.ndarray, candidates: Sequence[float] | None = None,
          cfg: SweepConfig = SweepConfig(), log=None) -> CutoffSweepResult:
    """Low-pass both domains at each candidate cutoff and record classifier accuracy."""
    domain_a = np.asarray(domain_a, dtype=np.float64)
    d = domain_a.ndim - 1
    if candidates is None:
        candidates = default_candidates(domain_a.shape[1:])
    return sweep_transform(domain_a, domain_b, candidates,
                           lambda x, c, _: spectral.lowpass(x, c, d), cfg, log=log)


def median_smooth(values: Sequence[float]) -> np.ndarray:
    """Three-point running median with the end points kept."""
    v = np.asarray(values, dtype=np.float64)
    out = v.copy()
    for i in range(1, len(v) - 1):
        out[i] = np.median(v[i - 1:i + 2])
    return out
