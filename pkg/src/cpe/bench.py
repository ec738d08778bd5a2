"""Instance generators, the experiment driver, aggregation and plot-data emission."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import EnvVector, InstanceDescriptor, NoiseSpec, gap_profile
from .env import Environment, make_rng
from .oracles import PartitionMatroid, PerfectMatching, TopK

log = logging.getLogger(__name__)

ALGORITHMS = ("polyalba", "alba", "gcbpe", "cluncb")
RESULT_FIELDS = ["algo", "instance", "trial", "returned", "correct", "samples",
                 "n_actions", "delta_min", "sample_scale", "error"]
TIMING_FIELDS = ["algo", "instance", "trial", "wall_ms"]
Z95 = 1.96

MULTI_BANDIT_THETA = (2.5, 2, 1.5, 1, 0.5, 0.625, 0.5, 0.375, 0.25, 0.125)


# -- generators ------------------------------------------------------------------------

def multi_bandit_instance(noise: NoiseSpec | None = None, reward: str = "linear") -> InstanceDescriptor:
    """Two groups of five arms, one pick per group; the best pair leads by 0.125."""
    theta = np.array(MULTI_BANDIT_THETA, dtype=float)
    return InstanceDescriptor(10, PartitionMatroid([5, 10]), EnvVector.tight(theta),
                              noise=noise or NoiseSpec(), reward=reward, name="multi-bandit")


def gen_topk_instance(d: int, k: int, delta_min: float, rng: np.random.Generator,
                      noise: NoiseSpec | None = None, seed: int | None = None) -> InstanceDescriptor:
    """Top-k means uniform in [0.5, 1]; arm k+1 sits ``delta_min`` below the weakest of them.

    The other arms are uniform in ``[-1, weakest - delta_min]``; arm positions
    are shuffled.
    """
    if not 1 <= k < d:
        raise ValueError(f"need 1 <= k < d, got k={k}, d={d}")
    if not 0 < delta_min <= 1:
        raise ValueError("delta_min must lie in (0, 1]")
    top = rng.uniform(0.5, 1.0, k)
    cut = float(top.min()) - delta_min
    if cut < -1.0:
        raise ValueError("delta_min leaves no room for the remaining arms")
    rest = rng.uniform(-1.0, cut, d - k - 1)
    means = np.concatenate([top, [cut], rest])
    theta = means[rng.permutation(d)]
    return InstanceDescriptor(d, TopK(d, k), EnvVector.tight(theta), noise=noise or NoiseSpec(),
                              seed=seed, name=f"topk-d{d}-k{k}-gap{delta_min:g}",
                              extra={"delta_min_target": delta_min})


def gen_matching_instance(n: int, rng: np.random.Generator | None = None, reward: str = "linear",
                          noise: NoiseSpec | None = None, ratio: float = 0.01,
                          seed: int | None = None) -> InstanceDescriptor:
    """Perfect matchings of K_{n,n} with a geometric theta from 1 down to ``ratio``.

    If the optimum is not unique, theta is perturbed by at most 1e-6 per entry
    and checked again.
    """
    if n < 2:
        raise ValueError("matching instances need n >= 2")
    d = n * n
    theta = np.geomspace(1.0, ratio, d)
    rng = rng if rng is not None else np.random.default_rng(0)
    for _ in range(100):
        try:
            return InstanceDescriptor(d, PerfectMatching(n), EnvVector.tight(theta),
                                      noise=noise or NoiseSpec(), reward=reward, seed=seed,
                                      name=f"matching-{n}x{n}")
        except ValueError:
            theta = theta + rng.uniform(0.0, 1e-6, d)
    raise RuntimeError("could not generate a matching instance with a unique optimum")


def instance_from_spec(spec: dict, base_seed: int = 0) -> InstanceDescriptor:
    """Build an instance from a plan entry: ``path``, inline ``instance`` or a ``generator``."""
    if "path" in spec:
        return InstanceDescriptor.load(spec["path"])
    if "instance" in spec:
        return InstanceDescriptor.from_json(spec["instance"])
    gen = spec.get("generator")
    seed = int(spec.get("seed", base_seed))
    noise = NoiseSpec.from_json(spec.get("noise"))
    rng = np.random.default_rng(seed)
    if gen == "topk":
        return gen_topk_instance(spec["d"], spec["k"], spec["delta_min"], rng, noise, seed)
    if gen == "matching":
        return gen_matching_instance(spec["n"], rng, spec.get("reward", "linear"), noise,
                                     spec.get("ratio", 0.01), seed)
    if gen == "multi-bandit":
        return multi_bandit_instance(noise, spec.get("reward", "linear"))
    raise ValueError(f"unknown instance spec {spec!r}")


# -- single runs -----------------------------------------------------------------------

def run_algorithm(algo: str, instance: InstanceDescriptor, cfg, rng: np.random.Generator):
    """One trial of ``algo``; returns its RunRecord (correctness filled in)."""
    from .algorithms import alba_full, clucb, gcb_pe, poly_alba
    from .algorithms.rewards import reward_top

    env = Environment.for_instance(instance, rng)
    if algo == "polyalba":
        rec = poly_alba(instance, cfg.delta, env, cfg)
    elif algo == "alba":
        rec = alba_full(instance, cfg.delta, env, cfg)
    elif algo == "gcbpe":
        rec = gcb_pe(instance, cfg.delta, env, cfg)
    elif algo == "cluncb":
        rec = clucb(instance, cfg.eps, cfg.delta, env, cfg)
    else:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGORITHMS}")
    if env.samples != rec.total_samples:
        raise AssertionError(f"environment counted {env.samples} pulls, record {rec.total_samples}")
    reward = instance.reward if algo == "gcbpe" else "linear"
    best, best_value = reward_top(instance.space, instance.theta.theta, reward, 1)[0]
    if algo == "cluncb":
        rec.correct = bool(rec.returned.value(instance.theta.theta) >= best_value - cfg.eps)
    else:
        rec.correct = rec.returned == best
    return rec


# -- experiment plans ------------------------------------------------------------------

@dataclass
class ExperimentPlan:
    instances: list[dict] = field(default_factory=list)
    algorithms: list[str] = field(default_factory=lambda: ["polyalba"])
    delta: float = 0.05
    trials: int = 20
    sample_scale: float = 1.0
    seed: int = 0
    eps: float = 0.1
    config: dict = field(default_factory=dict)
    output: str = "bench-out"

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}")

    @classmethod
    def from_json(cls, doc: dict) -> "ExperimentPlan":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown plan fields {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "ExperimentPlan":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def to_json(self) -> dict:
        return asdict(self)

    def run_config(self):
        from .algorithms import RunConfig

        return RunConfig(delta=self.delta, sample_scale=self.sample_scale, seed=self.seed,
                         eps=self.eps, **self.config)


def _trial_task(args) -> tuple[dict, dict]:
    algo, inst_id, inst_doc, trial, cfg, meta = args
    instance = InstanceDescriptor.from_json(inst_doc, validate=False)
    row = {"algo": algo, "instance": inst_id, "trial": trial, "returned": "", "correct": "",
           "samples": "", "sample_scale": repr(cfg.sample_scale), "error": "", **meta}
    t0 = time.perf_counter()
    try:
        rec = run_algorithm(algo, instance, cfg, make_rng(cfg.seed, trial))
        row.update(returned=rec.returned.bits(), correct=int(rec.correct), samples=rec.total_samples)
    except Exception as exc:  # recorded per trial, never aborting the plan
        row["error"] = f"{type(exc).__name__}: {exc}"
    wall = 1000 * (time.perf_counter() - t0)
    return row, {"algo": algo, "instance": inst_id, "trial": trial, "wall_ms": f"{wall:.3f}"}


def _workers() -> int:
    env = os.environ.get("CPE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def mean_ci(values: list[float]) -> dict:
    """Mean with the normal-approximation 95% interval ``mean +- 1.96 sd / sqrt(n)``."""
    n = len(values)
    if n == 0:
        return {"n": 0, "mean": None, "sd": None, "ci_low": None, "ci_high": None}
    arr = np.asarray(values, dtype=float)
    mean = float(arr.sum() / n)
    sd = float(arr.std(ddof=1)) if n > 1 else 0.0
    half = Z95 * sd / math.sqrt(n)
    return {"n": n, "mean": mean, "sd": sd, "ci_low": mean - half, "ci_high": mean + half}


def _csv_text(rows: list[dict], fields: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow(r)
    return buf.getvalue()


def summarize(rows: list[dict], timings: list[dict] | None = None) -> list[dict]:
    cells: dict[tuple[str, str], list[dict]] = {}
    for r in rows:
        cells.setdefault((r["instance"], r["algo"]), []).append(r)
    walls: dict[tuple[str, str], list[float]] = {}
    for t in timings or []:
        walls.setdefault((t["instance"], t["algo"]), []).append(float(t["wall_ms"]))
    out = []
    for (inst, algo), rs in cells.items():
        ok = [r for r in rs if not r["error"]]
        samples = mean_ci([float(r["samples"]) for r in ok])
        out.append({
            "instance": inst, "algo": algo, "trials": len(rs), "errors": len(rs) - len(ok),
            "success_rate": (sum(int(r["correct"]) for r in ok) / len(ok)) if ok else None,
            "samples": samples, "wall_ms": mean_ci(walls.get((inst, algo), [])),
            "n_actions": rs[0]["n_actions"], "delta_min": rs[0]["delta_min"],
        })
    return out


def run_plan(plan: ExperimentPlan, out_dir: str | os.PathLike | None = None,
             workers: int | None = None) -> dict:
    """Run every (instance, algorithm, trial) cell; write results, timings and summary.

    ``results.csv`` holds only seed-determined columns, so identical plans give
    byte-identical files; wall-clock times go to ``timings.csv``.
    """
    out = Path(out_dir if out_dir is not None else plan.output)
    out.mkdir(parents=True, exist_ok=True)
    cfg = plan.run_config()
    tasks = []
    for idx, spec in enumerate(plan.instances):
        inst = instance_from_spec(spec, plan.seed)
        inst_id = str(spec.get("id", inst.name or f"instance{idx}"))
        try:
            dmin = repr(gap_profile(inst, cap=cfg.enumeration_cap).delta_min)
        except Exception:
            dmin = ""
        meta = {"n_actions": inst.space.count(), "delta_min": dmin}
        doc = inst.to_json()
        for algo in plan.algorithms:
            for trial in range(plan.trials):
                tasks.append((algo, inst_id, doc, trial, cfg, meta))
    n_workers = min(workers or _workers(), max(1, len(tasks)))
    if n_workers <= 1:
        results = [_trial_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_trial_task, tasks))
    rows = [r for r, _ in results]
    timings = [t for _, t in results]
    (out / "results.csv").write_text(_csv_text(rows, RESULT_FIELDS))
    (out / "timings.csv").write_text(_csv_text(timings, TIMING_FIELDS))
    summary = {"plan": plan.to_json(), "cells": summarize(rows, timings),
               "errors": sum(1 for r in rows if r["error"])}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


# -- plot data -------------------------------------------------------------------------

def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"algo", "instance", "trial", "samples", "error"} - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"malformed results CSV, missing columns {sorted(missing)}")
        return list(reader)


def emit_plot_data(results_csv, out_dir, x: str | None = None) -> list[Path]:
    """Whitespace-separated series ``x mean ci_low ci_high n``, one block per algorithm.

    One file per metric (samples, and wall_ms when ``timings.csv`` sits next to
    the results). ``x`` is ``n_actions`` or ``delta_min``; by default the one
    that varies across instances.
    """
    rows = read_csv(results_csv)
    tpath = Path(results_csv).with_name("timings.csv")
    timings = read_csv_plain(tpath) if tpath.exists() else []
    cells = summarize(rows, timings)
    if x is None:
        xs = {c["n_actions"] for c in cells}
        x = "n_actions" if len(xs) > 1 else "delta_min"
    if x not in ("n_actions", "delta_min"):
        raise ValueError("x must be n_actions or delta_min")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    metrics = ["samples"] + (["wall_ms"] if timings else [])
    for metric in metrics:
        lines = [f"# metric={metric} x={x}", "# x mean ci_low ci_high n"]
        algos = sorted({c["algo"] for c in cells})
        for bi, algo in enumerate(algos):
            if bi:
                lines.extend(["", ""])
            lines.append(f"# algo={algo}")
            pts = [c for c in cells if c["algo"] == algo and c[metric]["n"]]
            pts.sort(key=lambda c: float(c[x]) if c[x] != "" else math.inf)
            for c in pts:
                s = c[metric]
                lines.append(f"{c[x]} {s['mean']:.10g} {s['ci_low']:.10g} {s['ci_high']:.10g} {s['n']}")
        path = out / f"{metric}_vs_{x}.dat"
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    return written


def read_csv_plain(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def plan_status(summary: dict) -> int:
    """Exit status: 0 clean, 2 when some trials failed."""
    return 2 if summary.get("errors") else 0
