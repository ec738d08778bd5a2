"""UCB-style (epsilon, delta)-PAC identification with a regularized least-squares estimator."""
from __future__ import annotations

import math
import time

import numpy as np

from ..core import InstanceDescriptor
from ..estimation import RegularizedState
from ..oracles import span_basis
from .common import RunConfig, RunRecord


class UncoverableArmError(ValueError):
    pass


class SpanDeficientError(ValueError):
    """Per-arm radii cannot shrink along directions orthogonal to every action."""


def default_iota(kappa: float, delta: float, L: float) -> float:
    """Balance the two terms of the confidence scale at t = 0, capped at 1."""
    if L <= 0:
        return 1.0
    return min(1.0, kappa ** 2 * math.log(1 / delta) / L ** 2)


def probe_action(space, state: RegularizedState, p: int):
    """An action with a large rank-one reduction of ``A^{-1}[p, p]``.

    Pulling ``x`` lowers that entry by ``(A^{-1} x)_p^2 / (1 + x^T A^{-1} x)``.
    The numerator is the square of a linear function of ``x``, so the oracle
    is asked for both of its extremes, with and without ``p`` forced in, and
    the best candidate is kept (ties prefer actions containing ``p``). The
    unconstrained candidates matter: for top-3 of 5 arms, the actions that
    contain a given arm span only four dimensions, and pulling only those
    never pins down that arm's mean.
    """
    row = state.A_inv[p]
    best, best_key = None, None
    for w in (row, -row):
        for forced in ({p}, ()):
            res = space.maximize(w, forced_in=forced)
            if res is None:
                continue
            x = res[0]
            v = x.vector
            u = state.A_inv @ v
            gain = u[p] ** 2 / (1.0 + v @ u)
            key = (round(gain, 12), x.has(p), -x.mask)
            if best_key is None or key > best_key:
                best, best_key = x, key
    if best is None or best_key[0] <= 0:
        raise UncoverableArmError(f"no feasible action reduces the uncertainty of base arm {p}")
    return best


def clucb(instance: InstanceDescriptor, eps: float, delta: float, env, cfg: RunConfig) -> RunRecord:
    """Perturb the estimate against the empirical best and probe the most uncertain disputed arm.

    The probe for the disputed arm ``p_t`` (ties on ``p_t`` go to the lowest
    index) is chosen by :func:`probe_action` to shrink the variance of
    coordinate ``p_t`` the most among four oracle candidates.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    t0 = time.perf_counter()
    space = instance.space
    d = space.d
    L = instance.theta.norm_bound
    iota = cfg.iota if cfg.iota is not None else default_iota(cfg.kappa, delta, L)
    state = RegularizedState(d=d, iota=iota, kappa=cfg.kappa, L=L, m=space.m)
    rec = RunRecord("cluncb")
    rec.extra["iota"] = iota
    _, Q = span_basis(space)
    if Q.shape[1] < d:
        # a direction v with x^T v = 0 for all x keeps A^{-1} >= v v^T / iota, so the
        # coordinate radii stay bounded away from zero and the stop rule can never fire
        raise SpanDeficientError(
            f"actions span rank {Q.shape[1]} < d={d}; the per-arm confidence radii cannot shrink")
    zeros = np.zeros(d)
    for e in range(d):
        res = space.maximize(zeros, forced_in={e})
        if res is None:
            raise UncoverableArmError(f"no feasible action contains base arm {e}")
        x = res[0]
        state.update(x, env.pull(x))
    rec.add_phase("init", d)
    pulls = 0
    while True:
        theta_hat = state.estimate()
        best = space.maximize(theta_hat)[0]
        rad = state.radii(delta)
        sign = np.where(best.vector > 0, -1.0, 1.0)
        theta_tilde = theta_hat + sign * rad
        challenger = space.maximize(theta_tilde)[0]
        gap = challenger.value(theta_tilde) - best.value(theta_tilde)
        if gap <= eps:
            break
        if state.t >= cfg.max_pulls:
            raise RuntimeError(f"CLUNCB exceeded {cfg.max_pulls} pulls")
        disputed = sorted(set(challenger.support) ^ set(best.support))
        p = disputed[int(np.argmax(rad[disputed]))]
        x = probe_action(space, state, p)
        state.update(x, env.pull(x))
        pulls += 1
    assert gap <= eps
    rec.add_phase("adaptive", pulls, eps)
    rec.returned = best
    rec.extra.update({"final_gap": float(gap), "pulls": state.t})
    rec.wall_clock_ms = 1000 * (time.perf_counter() - t0)
    rec.check()
    return rec
