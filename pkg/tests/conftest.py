"""Shared helpers: independent brute-force oracles and the acceptance report."""
from __future__ import annotations

import itertools
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cpe.actions import Action

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def report():
    """Record one acceptance criterion: ``report(n, passed, detail)``."""
    def _record(n: int, passed: bool, detail: str) -> None:
        ACCEPTANCE[n] = (bool(passed), detail)
        print(f"criterion {n}: {'PASS' if passed else 'FAIL'} ({detail})")
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


# -- brute-force feasibility checks written independently of the oracles ------------

def bits_of(mask: int, d: int) -> list[int]:
    return [(mask >> (d - 1 - i)) & 1 for i in range(d)]


def feasible_topk(bits, k):
    return sum(bits) == k


def feasible_partition(bits, boundaries):
    start = 0
    for end in boundaries:
        if sum(bits[start:end]) != 1:
            return False
        start = end
    return start == len(bits)


def feasible_matching(bits, n):
    a = np.asarray(bits).reshape(n, n)
    return bool(np.all(a.sum(axis=0) == 1) and np.all(a.sum(axis=1) == 1))


def feasible_path(bits, edges, source, sink):
    chosen = [edges[i] for i, b in enumerate(bits) if b]
    if not chosen:
        return False
    out = {}
    for u, v in chosen:
        if u in out:
            return False
        out[u] = v
    node, used = source, 0
    while node in out:
        node = out[node]
        used += 1
        if used > len(chosen):
            return False
    return node == sink and used == len(chosen)


def brute_actions(d: int, feasible) -> list[Action]:
    """All feasible actions in lexicographic bit order, by scanning every bit mask."""
    return [Action(d, mask) for mask in range(1 << d) if feasible(bits_of(mask, d))]


def brute_ranking(actions: list[Action], w: np.ndarray) -> list[tuple[Action, float]]:
    """Actions sorted by value (descending), ties by lexicographic bit order."""
    X = np.vstack([a.vector for a in actions])
    vals = X @ w
    order = sorted(range(len(actions)), key=lambda i: (-vals[i], actions[i].mask))
    return [(actions[i], float(vals[i])) for i in order]


def random_dag(rng: np.random.Generator, n_nodes: int, n_edges: int):
    """A random DAG on nodes 0..n_nodes-1 (edges go forward) with at least one 0->last path."""
    n = n_nodes
    spine = list(range(n))
    edges = {(spine[i], spine[i + 1]) for i in range(n - 1)}
    pairs = [(u, v) for u, v in itertools.combinations(range(n), 2) if (u, v) not in edges]
    rng.shuffle(pairs)
    for p in pairs[: max(0, n_edges - len(edges))]:
        edges.add(tuple(p))
    return sorted(edges), 0, n - 1
