"""Successive elimination over an explicit action list, and the halving wrapper around it."""
from __future__ import annotations

import logging
import math
from typing import Callable, Sequence

import numpy as np

from ..actions import Action, stack
from ..design import mirror_descent_design, orthonormal_span, spd_inverse, design_matrix
from ..estimation import elimination_budget, vector_est
from .common import PI_FACTOR, RoundCapError, RunConfig, RunRecord, c0_constant, lex_argmax

log = logging.getLogger(__name__)

Estimator = Callable[..., np.ndarray]


def elim_til(S: Sequence[Action], p: int, delta: float, env, cfg: RunConfig,
             record: RunRecord | None = None, L: float | None = None,
             estimator: Estimator | None = None, label: str = "elimtil"
             ) -> tuple[list[Action], np.ndarray | None]:
    """Eliminate from ``S`` until at most ``p`` actions remain.

    The design over ``S`` is computed once, in coordinates of span(S), and its
    rank replaces ``d`` in the per-round budget. ``estimator(lam, n, basis)``
    replaces the sampling estimator when given (used for noiseless checks).
    Returns the surviving actions and the last estimate (``None`` if no round ran).
    """
    S = sorted(set(S))
    if not S:
        raise ValueError("ElimTil needs a nonempty action set")
    if len(S) <= p:
        return S, None
    L = env.theta.norm_bound if L is None else L
    c0 = c0_constant(L)
    U = orthonormal_span(S)
    rank = U.shape[1]
    lam = mirror_descent_design(S, eps=cfg.mirror_eps, max_iters=cfg.mirror_max_iters, basis=U)
    if not lam.converged and record is not None:
        record.notes.append(f"{label}: mirror descent hit max_iters")
    M_inv = U @ spd_inverse(U.T @ design_matrix(lam) @ U) @ U.T
    n_total = len(S)
    cur = S
    theta_hat = None
    r = 1
    while len(cur) > p:
        if r > cfg.round_cap:
            raise RoundCapError(f"{label}: more than {cfg.round_cap} rounds with {len(cur)} > {p} left")
        eps_r = 2.0 ** -r
        delta_r = PI_FACTOR * delta / r ** 2
        n = elimination_budget(eps_r, rank, n_total, delta_r, c0, cfg.sample_scale)
        if estimator is None:
            theta_hat = vector_est(lam, n, env, basis=U, M_inv=M_inv)
        else:
            theta_hat = np.asarray(estimator(lam, n, U), dtype=float)
        if record is not None:
            record.add_phase(f"{label}-r{r}", n if estimator is None else 0, eps_r)
        vals = stack(cur) @ theta_hat
        best = vals[lex_argmax(vals)]
        cur = [x for x, v in zip(cur, vals) if not v < best - eps_r]
        r += 1
    return cur, theta_hat


def alba(S: Sequence[Action], delta: float, env, cfg: RunConfig, record: RunRecord | None = None,
         dim: int | None = None, L: float | None = None,
         estimator: Estimator | None = None) -> Action:
    """Halving epochs ``q = 1..floor(log2 dim)`` with targets ``floor(dim / 2^q)``.

    ``dim`` defaults to the rank of span(S) (the ambient ``d`` when S spans R^d).
    """
    S = sorted(set(S))
    if not S:
        raise ValueError("ALBA needs a nonempty action set")
    if len(S) == 1:
        return S[0]
    if dim is None:
        dim = orthonormal_span(S).shape[1]
    theta_hat = None
    last_delta = delta
    for q in range(1, int(math.floor(math.log2(dim))) + 1):
        last_delta = PI_FACTOR * delta / (q + 1) ** 2
        S, est = elim_til(S, dim // 2 ** q, last_delta, env, cfg, record, L, estimator,
                          label=f"alba-q{q}")
        if est is not None:
            theta_hat = est
        if len(S) == 1:
            return S[0]
    if theta_hat is None:
        S, theta_hat = elim_til(S, 1, last_delta, env, cfg, record, L, estimator, label="alba-final")
        if len(S) == 1:
            return S[0]
    vals = stack(S) @ theta_hat
    return S[lex_argmax(vals)]
