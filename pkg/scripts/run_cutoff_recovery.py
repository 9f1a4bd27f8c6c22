"""Classifier sweep on 2D fields with a known band limit; prints the pick per run."""

import argparse
import logging
import time

from serpentflow.cutoff import SweepConfig, sweep
from serpentflow.datagen import FieldSpec, gen_fields_2d


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--k0", type=int, nargs="+", default=[3, 5, 8])
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--count", type=int, default=400)
    p.add_argument("--slope", type=float, default=1.0)
    p.add_argument("--top", type=int, default=10, help="largest candidate; sweep runs down to 1")
    p.add_argument("--width", type=int, default=8)
    p.add_argument("--csv-dir", default=None)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    spec = FieldSpec(shape=(args.size, args.size), slope=args.slope)
    candidates = [float(c) for c in range(args.top, 0, -1)]
    for k0 in args.k0:
        for run in range(args.runs):
            seed = 100 * k0 + run
            a = gen_fields_2d(spec, 2 * seed + 1, args.count, cutoff=float(k0))
            b = gen_fields_2d(spec, 2 * seed + 2, args.count)
            start = time.time()
            res = sweep(a, b, candidates, SweepConfig(seed=run, width=args.width, stop_early=True),
                        log=logging.info)
            print(f"k0={k0} run={run} selected={res.selected} sanity={res.sanity_accuracy:.3f} "
                  f"time={time.time() - start:.0f}s", flush=True)
            if args.csv_dir:
                res.write_csv(f"{args.csv_dir}/k{k0}_run{run}.csv")


if __name__ == "__main__":
    main()
