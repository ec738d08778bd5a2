"""Per-trial wall clock of PolyALBA against ALBA on the enumerated action set.

Prints one line per matching size with both means and their ratio, which is
the quantity the runtime-trend acceptance check thresholds at n = 4.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from cpe.algorithms import RunConfig
from cpe.bench import gen_matching_instance, run_algorithm
from cpe.env import make_rng


def mean_wall(algo, inst, cfg, trials, seed):
    run_algorithm(algo, inst, cfg, make_rng(seed, 10 ** 6))  # warm-up
    walls = []
    for t in range(trials):
        t0 = time.perf_counter()
        run_algorithm(algo, inst, cfg, make_rng(seed, t))
        walls.append(time.perf_counter() - t0)
    return 1000 * float(np.mean(walls))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[3, 4, 5, 6])
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--sample-scale", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    cfg = RunConfig(sample_scale=args.sample_scale, enumeration_cap=10 ** 6)
    print(f"{'n':>3} {'|X|':>6} {'polyalba_ms':>12} {'alba_ms':>10} {'alba/poly':>9}")
    for n in args.sizes:
        inst = gen_matching_instance(n, np.random.default_rng(args.seed))
        poly = mean_wall("polyalba", inst, cfg, args.trials, args.seed)
        full = mean_wall("alba", inst, cfg, args.trials, args.seed)
        print(f"{n:>3} {inst.space.count():>6} {poly:>12.2f} {full:>10.2f} {full / poly:>9.2f}")


if __name__ == "__main__":
    main()
