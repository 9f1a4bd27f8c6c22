"""Comparison methods built on the same flow-matching loop.

* Dual FM: one Gaussian-to-data flow per domain; translate by encoding with the
  source flow (t: 1 -> 0) and decoding with the target flow (t: 0 -> 1).
* Bridge: partially noise the source sample to ``x_t* = (1 - t*) eps + t* x``
  and finish it with the target flow from ``t*`` to 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .cutoff import CutoffSweepResult, SweepConfig, sweep_transform
from .flowmatch import SolverConfig, TrainConfig, integrate_batched, train
from .models import UNetConfig, VelocityUNet
from .numerics.rng import make_rng


def derived_seed(seed: int, *labels) -> int:
    return int(make_rng(seed, *labels).integers(2 ** 31))


@dataclass
class DualFMModel:
    flow_a: VelocityUNet
    flow_b: VelocityUNet
    losses_a: list[float] = field(default_factory=list)
    losses_b: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.flow_a.config != self.flow_b.config:
            raise ValueError("both flows must share one architecture")


@dataclass
class BridgeModel:
    flow_b: VelocityUNet
    t_star: float

    def __post_init__(self):
        if not 0.0 <= self.t_star <= 1.0:
            raise ValueError("t_star must lie in [0, 1]")


def train_gaussian_flow(data: np.ndarray, unet: UNetConfig, cfg: TrainConfig, label: str):
    """Plain Gaussian-to-data flow: the pseudo-pair loop with an empty shared band."""
    seed = derived_seed(cfg.seed, "flow", label)
    model = VelocityUNet(unet, seed=seed)
    result = train(model, data, 0.0, replace(cfg, seed=seed))
    return model, result.losses


def train_dual_fm(domain_a: np.ndarray, domain_b: np.ndarray, unet: UNetConfig,
                  cfg: TrainConfig) -> DualFMModel:
    if np.shape(domain_a)[1:] != np.shape(domain_b)[1:]:
        raise ValueError("datasets must share one grid")
    flow_a, losses_a = train_gaussian_flow(domain_a, unet, cfg, "a")
    flow_b, losses_b = train_gaussian_flow(domain_b, unet, cfg, "b")
    return DualFMModel(flow_a, flow_b, losses_a, losses_b)


def translate_dual_fm(model: DualFMModel, x_a: np.ndarray,
                      cfg: SolverConfig = SolverConfig()) -> np.ndarray:
    z = integrate_batched(model.flow_a, np.asarray(x_a, dtype=np.float64), 1.0, 0.0, cfg)
    return integrate_batched(model.flow_b, z, 0.0, 1.0, cfg)


def noised(x: np.ndarray, t: float, seed: int, *labels) -> np.ndarray:
    """Point ``(1 - t) eps + t x`` on the straight path from fresh noise to ``x``."""
    eps = make_rng(seed, "bridge", *labels).standard_normal(np.shape(x))
    return (1.0 - t) * eps + t * np.asarray(x, dtype=np.float64)


def default_t_candidates() -> list[float]:
    return [round(0.1 * k, 1) for k in range(9, 0, -1)]


def select_t_star(domain_a: np.ndarray, domain_b: np.ndarray,
                  candidates: Sequence[float] | None = None,
                  cfg: SweepConfig = SweepConfig(), log=None) -> CutoffSweepResult:
    """Largest ``t`` at which noised samples of both domains are indistinguishable."""
    candidates = default_t_candidates() if candidates is None else list(candidates)
    if any(not 0.0 < t < 1.0 for t in candidates):
        raise ValueError("t candidates must lie in (0, 1)")
    return sweep_transform(domain_a, domain_b, candidates,
                           lambda x, t, dom: noised(x, t, cfg.seed, dom, repr(t)),
                           cfg, label="t", log=log)


def translate_bridge(model: BridgeModel, x_a: np.ndarray, seed: int,
                     cfg: SolverConfig = SolverConfig(), t_star: float | None = None
                     ) -> np.ndarray:
    t = model.t_star if t_star is None else float(t_star)
    start = noised(x_a, t, seed, "translate")
    return integrate_batched(model.flow_b, start, t, 1.0, cfg)


def robustness_grid(model: BridgeModel, x_a: np.ndarray, seed: int,
                    cfg: SolverConfig = SolverConfig(), delta: float = 0.1
                    ) -> dict[float, np.ndarray]:
    """Translations at ``t*`` and ``t* +- delta`` (clipped to [0, 1])."""
    ts = sorted({round(min(1.0, max(0.0, model.t_star + s * delta)), 10) for s in (-1, 0, 1)})
    return {t: translate_bridge(model, x_a, seed, cfg, t_star=t) for t in ts}
