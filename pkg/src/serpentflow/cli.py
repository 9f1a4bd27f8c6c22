"""Command-line interface.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 no cutoff found.
A ``--config`` file of ``key = value`` lines overrides command-line flags,
which override defaults; the resolved settings are written next to the
outputs as ``resolved_config.txt``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .baselines import (BridgeModel, default_t_candidates, robustness_grid, select_t_star,
                        train_dual_fm, train_gaussian_flow, translate_bridge, translate_dual_fm)
from .cutoff import SweepConfig, default_candidates, sweep
from .dataset import prepare_output, read_dataset, training_domains, write_dataset
from .datagen import (DegradationSpec, FieldSpec, SignalSpec, degrade, gen_fields_2d,
                      gen_timeseries, split_unpaired)
from .flowmatch import SolverConfig, Standardizer, TrainConfig, train, translate, write_loss_csv
from .metrics import (MetricReport, band_power_ratio, cdf_curve, ks, nse, psd,
                      realism_accuracy, temporal_rmse)
from .models import CheckpointError, UNetConfig, VelocityUNet, load_checkpoint, save_checkpoint
from .numerics.io import TensorFormatError, read_tensor, write_tensor
from .pipeline import lowband_rmse

log = logging.getLogger("serpentflow")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_NO_CUTOFF = 0, 2, 3, 4


class CutoffNotFound(Exception):
    pass


# -- configuration ----------------------------------------------------------------------
def read_config_file(path) -> dict[str, str]:
    out = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def resolve(args: argparse.Namespace, parser: argparse.ArgumentParser) -> argparse.Namespace:
    """Apply config-file values on top of the parsed flags, with type conversion."""
    if not getattr(args, "config", None):
        return args
    actions = {a.dest: a for a in parser._actions}
    for key, raw in read_config_file(args.config).items():
        if key not in actions or key in ("command", "config"):
            raise ValueError(f"unknown config key {key!r} for {args.command}")
        action = actions[key]
        if isinstance(action, argparse._StoreTrueAction):
            value = raw.lower() in ("1", "true", "yes", "on")
        else:
            value = action.type(raw) if action.type else raw
        setattr(args, key, value)
    return args


def write_resolved(args: argparse.Namespace, out_dir) -> None:
    items = sorted((k, v) for k, v in vars(args).items() if k not in ("func", "config"))
    text = "".join(f"{k} = {v}\n" for k, v in items)
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    (Path(out_dir) / "resolved_config.txt").write_text(text, encoding="utf-8")


def cutoff_value(text: str):
    if text == "auto":
        return text
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError("cutoff must be >= 0 or 'auto'")
    return value


def float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


# -- helpers ------------------------------------------------------------------------------
def _standardized_domains(path):
    a, b = training_domains(path)
    st = Standardizer.fit(b.values)
    return a, b, st


def _run_sweep(args, a, b, st, out_dir):
    d = a.values.ndim - 1
    cands = args.candidates or default_candidates(a.values.shape[1:])
    cfg = SweepConfig(threshold=args.threshold, steps=args.classifier_steps, seed=args.seed,
                      width=args.classifier_width, stop_early=args.stop_early)
    result = sweep(st.apply(a.values), st.apply(b.values), cands, cfg, log=log.info)
    result.write_csv(Path(out_dir) / "cutoff.csv")
    if not result.found:
        raise CutoffNotFound(f"no candidate reached accuracy <= {args.threshold}")
    log.info("selected cutoff %g (d=%d)", result.selected, d)
    return result.selected


def _solver(args) -> SolverConfig:
    return SolverConfig(method=args.method, rtol=args.rtol, atol=args.atol,
                        max_steps=args.max_steps, fixed_steps=args.fixed_steps)


def _train_cfg(args, out_dir=None) -> TrainConfig:
    return TrainConfig(batch_size=args.batch_size, lr=args.lr, steps=args.steps, seed=args.seed,
                       save_every=args.save_every,
                       checkpoint_dir=str(Path(out_dir) / "checkpoint") if out_dir else None)


# -- subcommands --------------------------------------------------------------------------
def cmd_gen_data(args) -> int:
    out = prepare_output(args.out, args.force)
    write_resolved(args, out)
    if args.kind == "timeseries":
        spec = SignalSpec(segment=args.segment, duration=2 * args.segments * args.segment,
                          noise_std=args.noise)
        series = gen_timeseries(spec, args.seed)
        _, dense = degrade(series.values, DegradationSpec(factor=args.factor, bits=args.bits),
                           args.seed, spec.sample_rate, spec.segment)
        split = split_unpaired(series.values, dense, spec.segment, args.segments)
        rate = spec.sample_rate
        write_dataset(out, {"a": (split.domain_a, rate, list(split.ids_a)),
                            "b": (split.domain_b, rate, list(split.ids_b)),
                            "truth": (split.hidden_truth, rate, list(split.ids_a))})
    else:
        spec = FieldSpec(shape=(args.size, args.size), slope=args.slope, peak=args.peak,
                         bump=args.bump)
        src_cut = None if args.source_cutoff < 0 else args.source_cutoff
        a = gen_fields_2d(spec, args.seed * 2 + 1, args.count, cutoff=src_cut)
        b = gen_fields_2d(spec, args.seed * 2 + 2, args.count)
        write_dataset(out, {"a": (a, 1.0, None), "b": (b, 1.0, None)})
    return EXIT_OK


def cmd_select_cutoff(args) -> int:
    out = Path(args.out)
    write_resolved(args, out)
    a, b, st = _standardized_domains(args.data)
    selected = _run_sweep(args, a, b, st, out)
    (out / "selected_cutoff.txt").write_text(f"{selected!r}\n", encoding="utf-8")
    print(selected)
    return EXIT_OK


def cmd_train(args) -> int:
    out = Path(args.out)
    write_resolved(args, out)
    a, b, st = _standardized_domains(args.data)
    cutoff = args.cutoff
    if cutoff == "auto":
        cutoff = _run_sweep(args, a, b, st, out)
    d = b.values.ndim - 1
    model = VelocityUNet(UNetConfig(dim=d, width=args.width), seed=args.seed)
    result = train(model, st.apply(b.values), cutoff, _train_cfg(args, out),
                   on_step=lambda s, v: s % 100 == 0 and log.info("step %d loss %.5f", s, v))
    save_checkpoint(out / "checkpoint", model, cutoff=float(cutoff), mean=st.mean, std=st.std,
                    method="serpentflow", step=len(result.losses))
    write_loss_csv(out / "loss.csv", result.losses)
    return EXIT_OK


def cmd_translate(args) -> int:
    out = Path(args.out)
    write_resolved(args, out)
    model, meta = load_checkpoint(args.checkpoint)
    if meta.get("method") != "serpentflow":
        raise CheckpointError("translate expects a SerpentFlow checkpoint")
    st = Standardizer(meta["mean"], meta["std"])
    cutoff = float(meta["cutoff"]) if args.cutoff == "auto" else float(args.cutoff)
    src = st.apply(read_dataset(args.data)["a"].values)
    if src.ndim - 1 != model.config.dim:
        raise ValueError("source grid does not match the model dimensionality")
    if args.ensemble < 0:
        raise ValueError("ensemble size must be >= 0")
    solver = _solver(args)
    names = []
    for k in range(args.ensemble + 1):
        scale = 0.0 if k == args.ensemble else 1.0
        member = translate(model, src, cutoff, args.seed * 1000 + k, solver, noise_scale=scale)
        name = "translated_zero.sft" if scale == 0.0 else f"translated_{k}.sft"
        write_tensor(out / name, st.invert(member))
        names.append(name)
    (out / "members.txt").write_text("\n".join(names) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_baseline(args) -> int:
    out = Path(args.out)
    write_resolved(args, out)
    a, b, st = _standardized_domains(args.data)
    xa, xb = st.apply(a.values), st.apply(b.values)
    unet = UNetConfig(dim=xa.ndim - 1, width=args.width)
    tcfg = _train_cfg(args)
    solver = _solver(args)
    if args.baseline == "dual":
        model = train_dual_fm(xa, xb, unet, tcfg)
        for tag, flow, losses in (("a", model.flow_a, model.losses_a), ("b", model.flow_b, model.losses_b)):
            save_checkpoint(out / f"checkpoint_{tag}", flow, method="dual_fm", mean=st.mean, std=st.std)
            write_loss_csv(out / f"loss_{tag}.csv", losses)
        write_tensor(out / "translated_0.sft", st.invert(translate_dual_fm(model, xa, solver)))
    else:
        flow_b, losses = train_gaussian_flow(xb, unet, tcfg, "b")
        cfg = SweepConfig(threshold=args.threshold, steps=args.classifier_steps, seed=args.seed,
                          width=args.classifier_width, stop_early=args.stop_early)
        sel = select_t_star(xa, xb, args.t_candidates or default_t_candidates(), cfg, log=log.info)
        sel.write_csv(out / "t_star.csv")
        if not sel.found:
            raise CutoffNotFound("no t candidate made the domains indistinguishable")
        model = BridgeModel(flow_b, sel.selected)
        save_checkpoint(out / "checkpoint_b", flow_b, method="bridge", t_star=model.t_star,
                        mean=st.mean, std=st.std)
        write_loss_csv(out / "loss_b.csv", losses)
        write_tensor(out / "translated_0.sft", st.invert(translate_bridge(model, xa, args.seed, solver)))
        for t, x in robustness_grid(model, xa, args.seed, solver).items():
            write_tensor(out / f"translated_t{t:.1f}.sft", st.invert(x))
    return EXIT_OK


def cmd_eval(args) -> int:
    out = Path(args.out)
    write_resolved(args, out)
    data = read_dataset(args.data, include_truth=True)
    if "a" not in data or "b" not in data:
        raise ValueError("evaluation needs both domains")
    st = Standardizer.fit(data["b"].values)
    gen = st.apply(read_tensor(args.translated))
    src, tgt = st.apply(data["a"].values), st.apply(data["b"].values)
    if gen.shape != src.shape:
        raise ValueError(f"translated shape {gen.shape} does not match source {src.shape}")
    d = gen.ndim - 1
    report = MetricReport()
    report.add("realism_accuracy", realism_accuracy(gen, tgt, seed=args.seed))
    if args.cutoff != "auto":
        report.add("lowband_rmse", lowband_rmse(gen, src, float(args.cutoff), d))
        report.add("highband_ratio", band_power_ratio(gen, tgt, float(args.cutoff), d))
    report.add("ks", ks(gen, tgt))
    if "truth" in data:
        truth = st.apply(data["truth"].values)
        report.add("nse", nse(gen, truth))
        report.add("temporal_rmse", temporal_rmse(gen.reshape(-1), truth.reshape(-1)))
    for name, x in (("psd_generated", gen), ("psd_target", tgt)):
        spec = psd(x, d)
        report.curves[name] = (spec.radius, spec.power)
    report.curves["cdf_generated"] = cdf_curve(gen)
    report.curves["cdf_target"] = cdf_curve(tgt)
    report.write(out)
    for k, v in report.scalars.items():
        print(f"{k} {v:.6f}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="serpentflow")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--config")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", required=out_required)

    def sweep_flags(sp):
        sp.add_argument("--threshold", type=float, default=0.55)
        sp.add_argument("--candidates", type=float_list, default=None)
        sp.add_argument("--classifier-steps", type=int, default=500)
        sp.add_argument("--classifier-width", type=int, default=8)
        sp.add_argument("--stop-early", action="store_true")

    def train_flags(sp):
        sp.add_argument("--steps", type=int, default=3000)
        sp.add_argument("--batch-size", type=int, default=32)
        sp.add_argument("--lr", type=float, default=1e-4)
        sp.add_argument("--width", type=int, default=16)
        sp.add_argument("--save-every", type=int, default=0)

    def solver_flags(sp):
        sp.add_argument("--method", choices=("dopri5", "rk4"), default="dopri5")
        sp.add_argument("--rtol", type=float, default=1e-5)
        sp.add_argument("--atol", type=float, default=1e-5)
        sp.add_argument("--max-steps", type=int, default=1000)
        sp.add_argument("--fixed-steps", type=int, default=100)

    g = sub.add_parser("gen-data", help="write a synthetic dataset directory")
    common(g)
    g.add_argument("--kind", choices=("timeseries", "fields2d"), default="timeseries")
    g.add_argument("--force", action="store_true")
    g.add_argument("--segments", type=int, default=128)
    g.add_argument("--segment", type=int, default=512)
    g.add_argument("--noise", type=float, default=0.02)
    g.add_argument("--factor", type=int, default=10)
    g.add_argument("--bits", type=int, default=4)
    g.add_argument("--count", type=int, default=400)
    g.add_argument("--size", type=int, default=64)
    g.add_argument("--slope", type=float, default=2.0)
    g.add_argument("--peak", type=float, default=8.0)
    g.add_argument("--bump", type=float, default=1.0)
    g.add_argument("--source-cutoff", type=float, default=8.0,
                   help="low-pass cutoff of domain a; negative keeps both domains identical")
    g.set_defaults(func=cmd_gen_data)

    s = sub.add_parser("select-cutoff", help="classifier sweep over candidate cutoffs")
    common(s)
    s.add_argument("--data", required=True)
    sweep_flags(s)
    s.set_defaults(func=cmd_select_cutoff)

    t = sub.add_parser("train", help="train the flow on pseudo-pairs of domain b")
    common(t)
    t.add_argument("--data", required=True)
    t.add_argument("--cutoff", type=cutoff_value, default="auto")
    train_flags(t)
    sweep_flags(t)
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("translate", help="map domain a through a trained flow")
    common(r)
    r.add_argument("--data", required=True)
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--cutoff", type=cutoff_value, default="auto",
                   help="'auto' uses the cutoff stored in the checkpoint")
    r.add_argument("--ensemble", type=int, default=5, help="noisy members; one zero-noise member is added")
    solver_flags(r)
    r.set_defaults(func=cmd_translate)

    b = sub.add_parser("baseline", help="train and run Dual FM or the bridge baseline")
    common(b)
    b.add_argument("--data", required=True)
    b.add_argument("--baseline", choices=("dual", "bridge"), default="dual")
    b.add_argument("--t-candidates", type=float_list, default=None)
    train_flags(b)
    sweep_flags(b)
    solver_flags(b)
    b.set_defaults(func=cmd_baseline)

    e = sub.add_parser("eval", help="metric report for translated samples")
    common(e)
    e.add_argument("--data", required=True)
    e.add_argument("--translated", required=True)
    e.add_argument("--cutoff", type=cutoff_value, default="auto")
    e.set_defaults(func=cmd_eval)
    return p


def _subparser(parser, command):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        args = resolve(args, _subparser(parser, args.command))
        return args.func(args)
    except CutoffNotFound as exc:
        log.error("%s", exc)
        return EXIT_NO_CUTOFF
    except (FloatingPointError, ArithmeticError, RuntimeError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (ValueError, KeyError, OSError, CheckpointError, TensorFormatError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
