"""Train and score SerpentFlow (and optionally Dual FM) on the degraded-sensor benchmark."""

import argparse
import logging
import time

from serpentflow.pipeline import ExperimentConfig, run_dual_fm, run_serpentflow


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default=None)
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--steps", type=int, default=3000)
    p.add_argument("--width", type=int, default=16)
    p.add_argument("--eval-segments", type=int, default=128)
    p.add_argument("--dual", action="store_true", help="also train the Dual FM baseline")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    for seed in args.seeds:
        cfg = ExperimentConfig(steps=args.steps, width=args.width, eval_segments=args.eval_segments,
                               train_seed=seed, translate_seed=seed, eval_seed=seed)
        start = time.time()
        out = None if args.out is None else f"{args.out}/seed{seed}"
        run = run_serpentflow(cfg, out)
        print(f"seed={seed} serpentflow {run.scores.as_dict()} loss={run.losses[-1]:.4f} "
              f"time={time.time() - start:.0f}s", flush=True)
        if args.dual:
            start = time.time()
            dual = run_dual_fm(cfg)
            print(f"seed={seed} dual_fm {dual.scores.as_dict()} time={time.time() - start:.0f}s", flush=True)


if __name__ == "__main__":
    main()
