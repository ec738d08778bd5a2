"""Polynomial-time best-action identification under full-bandit linear feedback."""
from __future__ import annotations

import logging
import math
import time

from ..core import InstanceDescriptor
from ..design import compute_lambda_alpha
from ..estimation import ell, vector_est
from .common import PI_FACTOR, RoundCapError, RunConfig, RunRecord, c0_constant
from .elimination import alba

log = logging.getLogger(__name__)


def poly_alba(instance: InstanceDescriptor, delta: float, env, cfg: RunConfig,
              estimator=None) -> RunRecord:
    """Static-design preparation epoch that shortlists at most ``r`` actions, then ALBA on them.

    ``r`` is the rank of span(X) (equal to ``d`` when X spans R^d). The
    action space is only touched through its oracles: X is never enumerated.
    """
    t0 = time.perf_counter()
    space = instance.space
    rec = RunRecord("polyalba")
    info = compute_lambda_alpha(space, eps=cfg.mirror_eps, max_iters=cfg.mirror_max_iters,
                                allow_deficient=True)
    rec.notes.extend(info.notes)
    r_dim, m, alpha = info.rank, info.m, info.alpha
    rec.extra.update({"alpha": alpha, "rank": r_dim, "design_support": len(info.lam.support)})
    L = instance.theta.norm_bound
    c0 = c0_constant(L)
    n_actions = space.count()
    log_x = math.log(n_actions)
    delta0 = PI_FACTOR * delta

    if n_actions <= r_dim:
        rec.notes.append(f"|X| = {n_actions} <= {r_dim}: whole space handed to ALBA")
        shortlist = space.enumerate(cfg.enumeration_cap)
    else:
        shortlist = None
        r = 1
        while shortlist is None:
            if r > cfg.round_cap:
                raise RoundCapError(f"preparation epoch exceeded {cfg.round_cap} rounds")
            eps_r = 2.0 ** -r
            delta_r = PI_FACTOR * delta0 / r ** 2
            raw = c0 * ell(eps_r / 2, m, r_dim, alpha) * (math.log(5) + log_x - math.log(delta_r))
            n = max(1, math.ceil(cfg.sample_scale * raw))
            if estimator is None:
                theta_hat = vector_est(info.lam, n, env, basis=info.basis, M_inv=info.M_inv)
            else:
                theta_hat = estimator(info.lam, n, info.basis)
            rec.add_phase(f"prep-r{r}", n if estimator is None else 0, eps_r)
            top = space.k_best(theta_hat, r_dim + 1)
            if top[0][1] - top[r_dim][1] > eps_r:
                best = top[0][1]
                shortlist = [x for x, v in top[:r_dim] if not best - v > eps_r]
                rec.extra["prep_rounds"] = r
            r += 1
    rec.extra["shortlist_size"] = len(shortlist)
    rec.returned = alba(shortlist, PI_FACTOR * delta / 4, env, cfg, rec, dim=r_dim, L=L,
                        estimator=estimator)
    rec.wall_clock_ms = 1000 * (time.perf_counter() - t0)
    rec.check()
    return rec


def alba_full(instance: InstanceDescriptor, delta: float, env, cfg: RunConfig) -> RunRecord:
    """Baseline: ALBA run directly on the explicitly enumerated action space."""
    t0 = time.perf_counter()
    rec = RunRecord("alba")
    actions = instance.space.enumerate(cfg.enumeration_cap)
    rec.returned = alba(actions, delta, env, cfg, rec, L=instance.theta.norm_bound)
    rec.extra["enumerated"] = len(actions)
    rec.wall_clock_ms = 1000 * (time.perf_counter() - t0)
    rec.check()
    return rec
