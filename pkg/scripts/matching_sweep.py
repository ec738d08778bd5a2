"""PolyALBA vs ALBA-on-enumerated-X over perfect matchings of K_{n,n}.

Writes results.csv / timings.csv / summary.json and the plot series
``samples_vs_n_actions.dat`` and ``wall_ms_vs_n_actions.dat``.
"""
from __future__ import annotations

import argparse
import logging

from cpe.bench import ExperimentPlan, emit_plot_data, run_plan


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[3, 4, 5])
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--sample-scale", type=float, default=1.0)
    ap.add_argument("--delta", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="out/matching-sweep")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO)

    plan = ExperimentPlan(
        instances=[{"generator": "matching", "n": n, "id": f"matching-{n}x{n}"} for n in args.sizes],
        algorithms=["polyalba", "alba"], delta=args.delta, trials=args.trials,
        sample_scale=args.sample_scale, seed=args.seed, output=args.out)
    summary = run_plan(plan, args.out)
    for cell in summary["cells"]:
        print(f"{cell['instance']:>14} {cell['algo']:>9}  success {cell['success_rate']}  "
              f"samples {cell['samples']['mean']:.4g}  wall {cell['wall_ms']['mean']:.2f} ms")
    for path in emit_plot_data(f"{args.out}/results.csv", f"{args.out}/plots", x="n_actions"):
        print(path)


if __name__ == "__main__":
    main()
