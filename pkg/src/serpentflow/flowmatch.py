"""Flow-matching training on pseudo-pairs and ODE transport.

Path convention (shared by every method in the package): ``t=0`` is the
pseudo-input (or Gaussian latent), ``t=1`` is the data sample, with the
linear interpolation ``x_t = (1 - t) x0 + t x1`` and target velocity
``x1 - x0``.  Generation integrates from 0 to 1.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import spectral
from .models import VelocityUNet, save_checkpoint
from .numerics.adam import AdamState, adam_step
from .numerics.rng import make_rng
from .numerics.tensor import Tensor, mse_loss

log = logging.getLogger(__name__)


class NonFiniteOutput(FloatingPointError):
    pass


class TrainingDiverged(FloatingPointError):
    def __init__(self, step: int, last_good: dict, losses: list[float]):
        super().__init__(f"loss became non-finite at step {step}")
        self.step = step
        self.last_good = last_good
        self.losses = losses


class MaxStepsExceeded(RuntimeError):
    def __init__(self, t: float, x: np.ndarray, trajectory: list[tuple[float, np.ndarray]]):
        super().__init__(f"ODE solver exceeded its step budget at t={t:.6g}")
        self.t = t
        self.x = x
        self.trajectory = trajectory


# -- time sampling ---------------------------------------------------------------------
@dataclass(frozen=True)
class TimeSampler:
    """``t = 1 / (1 + exp(p_std * eps + p_mean))`` clipped to ``[t_min, t_max]``."""

    p_mean: float = -1.2
    p_std: float = 1.2
    t_min: float = 1e-4
    t_max: float = 1.0

    def transform(self, eps) -> np.ndarray:
        eps = np.asarray(eps, dtype=np.float64)
        # 1/(1+exp(z)) written via tanh so that eps -> +-inf saturates cleanly
        z = self.p_std * eps + self.p_mean
        t = 0.5 * (1.0 - np.tanh(0.5 * z))
        return np.clip(t, self.t_min, self.t_max)

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        return self.transform(rng.standard_normal(size))


def sample_t(sampler: TimeSampler, seed: int, size=None) -> np.ndarray:
    return sampler.sample(make_rng(seed, "time"), size)


# -- path and loss ------------------------------------------------------------------------
@dataclass(frozen=True)
class FlowPath:
    """Linear path from ``x0`` at t=0 to ``x1`` at t=1."""

    @staticmethod
    def interpolate(x0: np.ndarray, x1: np.ndarray, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        if t.ndim:
            t = t.reshape(t.shape + (1,) * (x0.ndim - t.ndim))
        return (1.0 - t) * x0 + t * x1

    @staticmethod
    def target_velocity(x0: np.ndarray, x1: np.ndarray) -> np.ndarray:
        return x1 - x0


def fm_loss(model, x0: np.ndarray, x1: np.ndarray, t) -> Tensor:
    """Mean squared error between the predicted and the path velocity."""
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (x0.shape[0],))
    xt = FlowPath.interpolate(x0, x1, t)
    pred = model(xt, t)
    if not np.all(np.isfinite(pred.data)):
        raise NonFiniteOutput("velocity model produced non-finite values")
    return mse_loss(pred, FlowPath.target_velocity(x0, x1))


# -- training -------------------------------------------------------------------------------
@dataclass
class TrainConfig:
    batch_size: int = 32
    lr: float = 1e-4
    steps: int = 3000
    seed: int = 0
    save_every: int = 0
    checkpoint_dir: str | None = None
    sampler: TimeSampler = field(default_factory=TimeSampler)


@dataclass
class TrainResult:
    model: VelocityUNet
    losses: list[float]
    cutoff: float


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    while True:
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            yield order[start:start + batch_size]


def train(model: VelocityUNet, data: np.ndarray, cutoff: float, config: TrainConfig,
          on_step: Callable[[int, float], None] | None = None) -> TrainResult:
    """Fit ``model`` on pseudo-pairs built from ``data`` (the target domain).

    Each epoch reshuffles the data; every sample in every batch gets fresh noise
    and a fresh time draw.  ``cutoff=0`` turns the pseudo-input into pure noise,
    i.e. plain Gaussian-to-data flow matching.
    """
    data = np.asarray(data, dtype=np.float64)
    if len(data) == 0:
        raise ValueError("training set is empty")
    d = model.config.dim
    if data.ndim != d + 1:
        raise ValueError(f"expected a stack of {d}D fields, got shape {data.shape}")
    batches = _batches(len(data), config.batch_size, make_rng(config.seed, "train", "shuffle"))
    noise_rng = make_rng(config.seed, "train", "noise")
    time_rng = make_rng(config.seed, "train", "time")
    state = AdamState(learning_rate=config.lr)
    params = model.parameters()
    losses: list[float] = []
    for step in range(1, config.steps + 1):
        x1 = data[next(batches)]
        eps = noise_rng.standard_normal(x1.shape)
        x0 = spectral.pseudo_input(x1, eps, cutoff, d)
        t = config.sampler.sample(time_rng, len(x1))
        model.zero_grad()
        try:
            loss = fm_loss(model, x0, x1, t)
        except NonFiniteOutput:
            raise TrainingDiverged(step, model.state_dict(), losses) from None
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingDiverged(step, model.state_dict(), losses)
        loss.backward()
        adam_step(state, params, {k: p.grad for k, p in params.items()})
        losses.append(value)
        if on_step is not None:
            on_step(step, value)
        if config.save_every and config.checkpoint_dir and step % config.save_every == 0:
            save_checkpoint(config.checkpoint_dir, model, cutoff=float(cutoff), step=step)
    return TrainResult(model, losses, float(cutoff))


def write_loss_csv(path, losses: list[float]) -> None:
    lines = ["step,loss"] + [f"{i},{v!r}" for i, v in enumerate(losses, start=1)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- integration ---------------------------------------------------------------------------
@dataclass
class SolverConfig:
    method: str = "dopri5"
    rtol: float = 1e-5
    atol: float = 1e-5
    max_steps: int = 1000
    fixed_steps: int = 100

    def __post_init__(self):
        if self.method not in ("dopri5", "rk4"):
            raise ValueError(f"unknown solver method {self.method!r}")
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_steps < 1 or self.fixed_steps < 1:
            raise ValueError("step budgets must be >= 1")


@dataclass
class IntegrationResult:
    x: np.ndarray
    steps: int
    rejected: int = 0
    evaluations: int = 0


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
# last 5th-order weight chosen so the weights sum to one exactly in floating point
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784)
_B5 = _B5 + (1.0 - (((_B5[0] + _B5[2]) + _B5[3]) + _B5[4]), 0.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    _B5[:6],
)
_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)
_E = tuple(b5 - b4 for b5, b4 in zip(_B5, _B4))


def _as_rhs(f) -> Callable[[np.ndarray, float], np.ndarray]:
    if hasattr(f, "velocity"):
        return lambda x, t: f.velocity(x, min(max(t, 0.0), 1.0))
    return f


def _combine(y, h, coeffs, ks):
    out = y.copy()
    for c, k in zip(coeffs, ks):
        if c:
            out += (h * c) * k
    return out


def integrate(f, x_start: np.ndarray, t_start: float, t_end: float,
              cfg: SolverConfig = SolverConfig(), record: bool = False) -> IntegrationResult:
    """Solve ``dx/dt = f(x, t)`` from ``t_start`` to ``t_end`` (either direction).

    ``f`` is a velocity model (evaluated without gradients, with ``t`` clamped
    into [0, 1]) or any callable ``f(x, t)``.  DOPRI5 accepts a step when
    ``||err||_inf <= atol + rtol * max(||x||_inf, ||x_new||_inf)`` and adapts
    the step with a PI controller; the first trial step spans the whole
    interval.
    """
    rhs = _as_rhs(f)
    y = np.array(x_start, dtype=np.float64)
    span = float(t_end) - float(t_start)
    if span == 0.0:
        return IntegrationResult(y, 0)
    if cfg.method == "rk4":
        return _rk4(rhs, y, float(t_start), float(t_end), cfg.fixed_steps)

    direction = 1.0 if span > 0 else -1.0
    t = float(t_start)
    h = span
    k1 = rhs(y, t)
    evals = 1
    steps = rejected = 0
    err_prev = 1e-4
    safety, alpha, beta = 0.9, 0.7 / 5, 0.4 / 5
    trajectory = [(t, y.copy())] if record else []
    while direction * (t_end - t) > 0:
        if steps + rejected >= cfg.max_steps:
            raise MaxStepsExceeded(t, y, trajectory or [(t, y.copy())])
        if direction * (t + h - t_end) > 0:
            h = t_end - t
        ks = [k1]
        for i in range(1, 7):
            yi = _combine(y, h, _A[i], ks)
            ks.append(rhs(yi, t + _C[i] * h))
        evals += 6
        y_new = yi  # stage 7 evaluates at the 5th-order solution (FSAL)
        err_vec = _combine(np.zeros_like(y), h, _E, ks)
        scale = cfg.atol + cfg.rtol * max(float(np.max(np.abs(y))), float(np.max(np.abs(y_new))))
        err = float(np.max(np.abs(err_vec))) / scale
        if not math.isfinite(err):
            raise FloatingPointError("non-finite error estimate during integration")
        if err <= 1.0:
            t = t_end if abs(t_end - (t + h)) <= 1e-14 * max(1.0, abs(t_end)) else t + h
            y = y_new
            k1 = ks[6]
            steps += 1
            if record:
                trajectory.append((t, y.copy()))
            if err == 0.0:
                factor = 10.0
            else:
                factor = safety * err ** -alpha * err_prev ** beta
                factor = min(10.0, max(0.2, factor))
            err_prev = max(err, 1e-4)
        else:
            rejected += 1
            factor = max(0.2, safety * err ** -alpha)
        h *= factor
    result = IntegrationResult(y, steps, rejected, evals)
    if record:
        result.trajectory = trajectory
    return result


def _rk4(rhs, y, t0, t1, n) -> IntegrationResult:
    h = (t1 - t0) / n
    for i in range(n):
        t = t0 + i * h
        k1 = rhs(y, t)
        k2 = rhs(y + 0.5 * h * k1, t + 0.5 * h)
        k3 = rhs(y + 0.5 * h * k2, t + 0.5 * h)
        k4 = rhs(y + h * k3, t + h)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return IntegrationResult(y, n, 0, 4 * n)


def integrate_batched(f, x: np.ndarray, t_start: float, t_end: float, cfg: SolverConfig,
                      chunk: int = 64) -> np.ndarray:
    """Integrate fixed-size chunks independently (bounded memory, fixed grouping)."""
    out = [integrate(f, x[i:i + chunk], t_start, t_end, cfg).x for i in range(0, len(x), chunk)]
    return np.concatenate(out) if out else np.array(x, dtype=np.float64)


# -- inference -------------------------------------------------------------------------------
def translate(model: VelocityUNet, x_a: np.ndarray, cutoff: float, seed: int,
              cfg: SolverConfig = SolverConfig(), noise_scale: float = 1.0,
              chunk: int = 64) -> np.ndarray:
    """Map source fields to the target domain.

    Builds the pseudo-input (source low band plus seeded noise high band),
    checks the low band before integrating, then transports it from t=0 to 1.
    """
    x_a = np.asarray(x_a, dtype=np.float64)
    d = model.config.dim
    pair = spectral.make_pseudo(x_a, cutoff, seed=seed, d=d, noise_scale=noise_scale)
    gap = np.max(np.abs(spectral.lowpass(pair.pseudo_input, cutoff, d) - spectral.lowpass(x_a, cutoff, d)))
    assert gap < 1e-9 * max(1.0, float(np.max(np.abs(x_a)))), f"low band mismatch {gap:.3e}"
    return integrate_batched(model, pair.pseudo_input, 0.0, 1.0, cfg, chunk)


# -- normalisation ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Standardizer:
    """Scalar affine map fitted on the target domain and applied to both."""

    mean: float
    std: float

    @classmethod
    def fit(cls, data) -> "Standardizer":
        data = np.asarray(data, dtype=np.float64)
        std = float(data.std())
        if not std > 0:
            raise ValueError("cannot standardise constant data")
        return cls(float(data.mean()), std)

    def apply(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def invert(self, z) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.std + self.mean
