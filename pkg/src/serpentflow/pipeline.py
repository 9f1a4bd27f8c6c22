"""End-to-end runs shared by the CLI, the experiment scripts and the acceptance tests."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import spectral
from .baselines import DualFMModel, train_dual_fm, translate_dual_fm
from .datagen import DegradationSpec, SignalSpec, UnpairedSplit, degrade, gen_timeseries, split_unpaired
from .flowmatch import SolverConfig, Standardizer, TrainConfig, translate, train, write_loss_csv
from .metrics import band_power_ratio, per_bin_ratio, realism_accuracy
from .models import UNetConfig, VelocityUNet, save_checkpoint
from .numerics.io import write_tensor

log = logging.getLogger(__name__)


@dataclass
class ExperimentConfig:
    segments_per_domain: int = 400
    # translating is the slow part on CPU, so only the first segments of D_A are scored
    eval_segments: int = 128
    data_seed: int = 0
    train_seed: int = 0
    translate_seed: int = 0
    eval_seed: int = 0
    cutoff: float = 60.0
    steps: int = 3000
    batch_size: int = 32
    lr: float = 1e-4
    width: int = 16
    rtol: float = 1e-5
    atol: float = 1e-5
    signal: SignalSpec = field(default_factory=SignalSpec)
    degradation: DegradationSpec = field(default_factory=DegradationSpec)


@dataclass
class Scores:
    lowband_rmse: float
    highband_ratio: float
    realism: float
    per_bin_ratio: float = float("nan")

    def as_dict(self) -> dict[str, float]:
        return {"lowband_rmse": self.lowband_rmse, "highband_ratio": self.highband_ratio,
                "realism_accuracy": self.realism, "highband_ratio_per_bin": self.per_bin_ratio}


def timeseries_domains(cfg: ExperimentConfig) -> tuple[UnpairedSplit, Standardizer]:
    """Generate the degraded-sensor benchmark and the target-domain standardiser."""
    n = cfg.signal.segment
    spec = SignalSpec(**{**cfg.signal.__dict__, "duration": 2 * cfg.segments_per_domain * n})
    series = gen_timeseries(spec, cfg.data_seed)
    _, dense = degrade(series.values, cfg.degradation, cfg.data_seed, spec.sample_rate, n)
    split = split_unpaired(series.values, dense, n, cfg.segments_per_domain)
    return split, Standardizer.fit(split.domain_b)


def lowband_rmse(output: np.ndarray, source: np.ndarray, cutoff: float, d: int = 1) -> float:
    gap = spectral.lowpass(output, cutoff, d) - spectral.lowpass(source, cutoff, d)
    return float(np.sqrt(np.mean(gap ** 2)))


def score(output, source, target, cutoff: float, seed: int, d: int = 1) -> Scores:
    """Score a translation; realism uses as many target samples as there are outputs."""
    return Scores(lowband_rmse(output, source, cutoff, d),
                  band_power_ratio(output, target, cutoff, d),
                  realism_accuracy(output, target[: len(output)], seed=seed),
                  per_bin_ratio(output, target, cutoff, d))


def _train_cfg(cfg: ExperimentConfig, seed: int) -> TrainConfig:
    return TrainConfig(batch_size=cfg.batch_size, lr=cfg.lr, steps=cfg.steps, seed=seed)


def _solver(cfg: ExperimentConfig) -> SolverConfig:
    return SolverConfig(rtol=cfg.rtol, atol=cfg.atol)


@dataclass
class SerpentRun:
    model: VelocityUNet
    losses: list[float]
    output: np.ndarray
    scores: Scores


def run_serpentflow(cfg: ExperimentConfig, out_dir=None) -> SerpentRun:
    split, st = timeseries_domains(cfg)
    a, b = st.apply(split.domain_a), st.apply(split.domain_b)
    model = VelocityUNet(UNetConfig(dim=1, width=cfg.width), seed=cfg.train_seed)
    result = train(model, b, cfg.cutoff, _train_cfg(cfg, cfg.train_seed))
    a = a[: cfg.eval_segments]
    out = translate(model, a, cfg.cutoff, cfg.translate_seed, _solver(cfg))
    scores = score(out, a, b, cfg.cutoff, cfg.eval_seed)
    log.info("serpentflow seed=%d %s", cfg.train_seed, scores)
    if out_dir is not None:
        out_dir = Path(out_dir)
        save_checkpoint(out_dir / "checkpoint", model, cutoff=float(cfg.cutoff),
                        mean=st.mean, std=st.std, method="serpentflow")
        write_loss_csv(out_dir / "loss.csv", result.losses)
        write_tensor(out_dir / "translated.sft", st.invert(out))
        rows = ["name,value"] + [f"{k},{v!r}" for k, v in scores.as_dict().items()]
        (out_dir / "scores.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    return SerpentRun(model, result.losses, out, scores)


@dataclass
class DualRun:
    model: DualFMModel
    output: np.ndarray
    scores: Scores


def run_dual_fm(cfg: ExperimentConfig) -> DualRun:
    split, st = timeseries_domains(cfg)
    a, b = st.apply(split.domain_a), st.apply(split.domain_b)
    model = train_dual_fm(a, b, UNetConfig(dim=1, width=cfg.width), _train_cfg(cfg, cfg.train_seed))
    a = a[: cfg.eval_segments]
    out = translate_dual_fm(model, a, _solver(cfg))
    scores = score(out, a, b, cfg.cutoff, cfg.eval_seed)
    log.info("dual-fm seed=%d %s", cfg.train_seed, scores)
    return DualRun(model, out, scores)
