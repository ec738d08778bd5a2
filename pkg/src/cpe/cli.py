"""Command-line entry point: instance generation, runs, benchmarks, oracle and design queries."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

import numpy as np

from .core import InstanceDescriptor, NoiseSpec

log = logging.getLogger("cpe")


def _noise_from_args(args) -> NoiseSpec:
    if args.noise == "none":
        return NoiseSpec("none")
    if args.noise == "uniform-box":
        return NoiseSpec("uniform-box", range=args.noise_range)
    return NoiseSpec(args.noise, sigma=args.sigma)


def cmd_gen_instance(args) -> int:
    from .bench import gen_matching_instance, gen_topk_instance, multi_bandit_instance

    rng = np.random.default_rng(args.seed)
    noise = _noise_from_args(args)
    if args.type == "topk":
        inst = gen_topk_instance(args.d, args.k, args.delta_min, rng, noise, args.seed)
    elif args.type == "matching":
        inst = gen_matching_instance(args.n, rng, args.reward, noise, seed=args.seed)
    else:
        inst = multi_bandit_instance(noise, args.reward)
    text = inst.dumps() + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_run(args) -> int:
    from .bench import mean_ci, run_algorithm
    from .algorithms import RunConfig
    from .env import make_rng

    inst = InstanceDescriptor.load(args.instance)
    cfg = RunConfig(delta=args.delta, sample_scale=args.sample_scale, seed=args.seed, eps=args.eps)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["trial", "returned", "correct", "samples", "wall_ms"])
    records = []
    for trial in range(args.trials):
        rec = run_algorithm(args.algo, inst, cfg, make_rng(args.seed, trial))
        records.append(rec)
        writer.writerow([trial, rec.returned.bits(), int(rec.correct), rec.total_samples,
                         f"{rec.wall_clock_ms:.3f}"])
    summary = {
        "algo": args.algo, "instance": args.instance, "trials": args.trials,
        "delta": args.delta, "sample_scale": args.sample_scale, "seed": args.seed,
        "success_rate": sum(r.correct for r in records) / len(records),
        "samples": mean_ci([r.total_samples for r in records]),
        "wall_ms": mean_ci([r.wall_clock_ms for r in records]),
        "notes": sorted({n for r in records for n in r.notes}),
    }
    text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    if args.summary:
        with open(args.summary, "w") as fh:
            fh.write(text)
    else:
        sys.stderr.write(text)
    return 0


def cmd_bench(args) -> int:
    from .bench import ExperimentPlan, plan_status, run_plan

    plan = ExperimentPlan.load(args.plan)
    summary = run_plan(plan, args.out)
    return plan_status(summary)


def _read_weights(path: str) -> np.ndarray:
    with open(path) as fh:
        text = fh.read().replace(",", " ").split()
    return np.array([float(t) for t in text])


def cmd_kbest(args) -> int:
    inst = InstanceDescriptor.load(args.instance)
    w = _read_weights(args.weights)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["rank", "value", "action"])
    for i, (x, v) in enumerate(inst.space.k_best(w, args.k), start=1):
        writer.writerow([i, repr(v), x.bits()])
    return 0


def cmd_design(args) -> int:
    from .design import compute_lambda_alpha, design_objective

    inst = InstanceDescriptor.load(args.instance)
    info = compute_lambda_alpha(inst.space, eps=args.eps, allow_deficient=True)
    doc = info.to_json()
    doc["objective"] = design_objective(info.lam, basis=info.basis)
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    return 0


def cmd_plot_data(args) -> int:
    from .bench import emit_plot_data

    for path in emit_plot_data(args.results, args.out, args.x):
        print(path)
    return 0


def cmd_budget(args) -> int:
    from .algorithms import theoretical_budget

    inst = InstanceDescriptor.load(args.instance)
    sys.stdout.write(json.dumps(theoretical_budget(inst, args.delta), indent=2) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cpe", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-instance", help="write an instance JSON")
    g.add_argument("--type", choices=["topk", "matching", "multi-bandit"], required=True)
    g.add_argument("--d", type=int, default=8)
    g.add_argument("--k", type=int, default=3)
    g.add_argument("--delta-min", type=float, default=0.5)
    g.add_argument("--n", type=int, default=3)
    g.add_argument("--reward", choices=["linear", "mean-normalized"], default="linear")
    g.add_argument("--noise", choices=["scalar-gaussian", "gaussian", "uniform-box", "none"],
                   default="scalar-gaussian")
    g.add_argument("--sigma", type=float, default=1.0)
    g.add_argument("--noise-range", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen_instance)

    r = sub.add_parser("run", help="run trials of one algorithm on one instance")
    r.add_argument("--algo", choices=["polyalba", "gcbpe", "cluncb", "alba"], required=True)
    r.add_argument("--instance", required=True)
    r.add_argument("--delta", type=float, default=0.05)
    r.add_argument("--trials", type=int, default=20)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--sample-scale", type=float, default=1.0)
    r.add_argument("--eps", type=float, default=0.1)
    r.add_argument("--summary", help="write the JSON summary here instead of stderr")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="execute an experiment plan")
    b.add_argument("--plan", required=True)
    b.add_argument("--out", help="output directory (default: the plan's 'output')")
    b.set_defaults(func=cmd_bench)

    k = sub.add_parser("kbest", help="k best actions under given weights")
    k.add_argument("--instance", required=True)
    k.add_argument("--weights", required=True)
    k.add_argument("--k", type=int, required=True)
    k.set_defaults(func=cmd_kbest)

    d = sub.add_parser("design", help="G-optimal design on a spanning basis")
    d.add_argument("--instance", required=True)
    d.add_argument("--eps", type=float, default=1e-2)
    d.set_defaults(func=cmd_design)

    pd = sub.add_parser("plot-data", help="series files from a results CSV")
    pd.add_argument("--results", required=True)
    pd.add_argument("--out", required=True)
    pd.add_argument("--x", choices=["n_actions", "delta_min"])
    pd.set_defaults(func=cmd_plot_data)

    bu = sub.add_parser("budget", help="theoretical sample-complexity report (non-binding)")
    bu.add_argument("--instance", required=True)
    bu.add_argument("--delta", type=float, default=0.05)
    bu.set_defaults(func=cmd_budget)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:
        if args.verbose:
            log.exception("command failed")
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
