"""Static exploration with a global observer set for partial linear feedback."""
from __future__ import annotations

import logging
import math
import time

import numpy as np

from ..actions import Action
from ..core import InstanceDescriptor
from ..env import FeedbackRule, ObserverSet, ObserverSetError, build_observer_set
from ..estimation import gcb_radius
from ..oracles import ActionSpace, span_basis
from .common import RoundCapError, RunConfig, RunRecord
from .rewards import lipschitz_constant, reward_matrix, reward_top

log = logging.getLogger(__name__)


def default_pool(space: ActionSpace) -> list[Action]:
    """Span basis first, then for each base arm the lexicographically first action led by it."""
    pool, _ = span_basis(space)
    seen = set(pool)
    zeros = np.zeros(space.d)
    for e in range(space.d):
        res = space.maximize(zeros, forced_in={e}, forced_out=set(range(e)))
        if res is not None and res[0] not in seen:
            pool.append(res[0])
            seen.add(res[0])
    return pool


def observer_for_instance(instance: InstanceDescriptor, pool: list[Action] | None = None
                          ) -> ObserverSet:
    """Full-rank observer set if one exists in the pool, else one covering span(X).

    In the second case the estimator targets the projection of theta onto
    span(X), which determines every reward ``x^T theta`` exactly.
    """
    space = instance.space
    rule = FeedbackRule.from_json(instance.feedback)
    if pool is None:
        listed = instance.extra.get("observer_pool")
        pool = [Action.from_string(b) for b in listed] if listed else default_pool(space)
    try:
        return build_observer_set(space, rule, pool)
    except ObserverSetError as exc:
        first_error = exc
    _, Q = span_basis(space)
    r = Q.shape[1]
    if r == space.d:
        raise ObserverSetError(f"X spans R^d but {first_error}")
    obs = build_observer_set(space, rule, pool, target_rank=r)
    if np.linalg.norm(Q - obs.basis @ (obs.basis.T @ Q)) > 1e-8:
        raise ObserverSetError("observer row space does not contain span(X)")
    return obs


def _candidates(space, theta, reward, K, pinv):
    """Lex-sorted candidate actions, their reward rows mapped onto stacked feedback sums,
    and the value no non-candidate can exceed at ``theta`` (``-inf`` if exhaustive)."""
    top = reward_top(space, theta, reward, K)
    acts = sorted(x for x, _ in top)
    exhaustive = len(top) < K or len(top) >= space.count()
    floor_value = -math.inf if exhaustive else top[-1][1]
    return acts, reward_matrix(acts, reward) @ pinv, floor_value


def _top_two(vals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise largest and second largest entries (columnwise sweep, cheap for few columns)."""
    v1 = vals[:, 0].copy()
    v2 = np.full(len(vals), -np.inf)
    for c in range(1, vals.shape[1]):
        col = vals[:, c]
        np.maximum(v2, np.minimum(v1, col), out=v2)
        np.maximum(v1, col, out=v1)
    return v1, v2


def gcb_pe(instance: InstanceDescriptor, delta: float, env, cfg: RunConfig,
           observer: ObserverSet | None = None) -> RunRecord:
    """Pull the observer set once per round until the empirical gap exceeds ``2 L_p rad_n``.

    Rounds are simulated in vectorized blocks. Each round's empirical best and
    runner-up are read off a candidate list from an anchor estimate; this is
    exact while the second candidate provably beats every non-candidate
    (Lipschitz bound around the anchor), and otherwise the oracle is called
    for that round and the anchor moves there.
    """
    t0 = time.perf_counter()
    space = instance.space
    reward = instance.reward
    rec = RunRecord("gcbpe")
    obs = observer if observer is not None else observer_for_instance(instance)
    L_p = lipschitz_constant(space, reward, cfg.lipschitz)
    beta = obs.beta_sigma
    rec.extra.update({"observer_size": len(obs.actions), "beta_sigma": beta,
                      "beta_kind": obs.beta_kind, "L_p": L_p, "observer_rank": obs.rank})
    if obs.reduced:
        rec.notes.append(f"observer set covers span(X) of rank {obs.rank} < d={obs.d}")
    if env.noise.kind in ("gaussian", "scalar-gaussian"):
        rec.notes.append("theory-mismatch: Gaussian noise is unbounded, the radius assumes box noise")
    K = cfg.candidates or 2 * space.d + 2
    K = max(K, 2)
    sigma = len(obs.actions)

    total = np.zeros(obs.stacked.shape[0])
    n_done = 0
    anchor = None
    acts = G = None
    floor_value = -math.inf
    returned = runner = None
    stop_gap = stop_rad = None
    exact_calls = 0
    pinv_t = obs.pinv.T
    while returned is None:
        if n_done >= cfg.max_rounds:
            raise RoundCapError(f"GCB-PE exceeded {cfg.max_rounds} exploration rounds")
        C = int(min(cfg.chunk_rounds, cfg.max_rounds - n_done))
        sums = total + np.cumsum(env.observe_rounds(obs, C), axis=0)
        ns = np.arange(n_done + 1, n_done + C + 1, dtype=float)
        rads = np.sqrt(2 * beta ** 2 * np.log(4 * ns ** 2 * math.e ** 2 / delta) / ns)
        i = 0
        while i < C:
            if anchor is None:
                anchor = sums[i] @ pinv_t / ns[i]
                acts, G, floor_value = _candidates(space, anchor, reward, K, obs.pinv)
                exact_calls += 1
            vals = (sums[i:] @ G.T) / ns[i:, None]
            v1, v2 = _top_two(vals)
            if floor_value == -math.inf:
                valid = np.ones(len(vals), dtype=bool)
            else:
                drift = np.linalg.norm(sums[i:] @ pinv_t / ns[i:, None] - anchor, axis=1)
                valid = v2 > floor_value + L_p * drift
            stop = valid & (v1 - v2 > 2 * L_p * rads[i:])
            bad = ~valid | stop
            if not bad.any():
                break
            j = int(np.argmax(bad))
            k = i + j
            if stop[j]:
                row = vals[j].copy()
                b1 = int(np.argmax(row))
                row[b1] = -np.inf
                b2 = int(np.argmax(row))
                returned, runner = acts[b1], acts[b2]
                stop_gap, stop_rad = float(v1[j] - v2[j]), float(rads[k])
                n_final = n_done + k + 1
                break
            # candidate list cannot certify this round: ask the oracle, then re-anchor here
            theta_k = sums[k] @ pinv_t / ns[k]
            top = reward_top(space, theta_k, reward, 2)
            exact_calls += 1
            if len(top) >= 2 and top[0][1] - top[1][1] > 2 * L_p * rads[k]:
                returned, runner = top[0][0], top[1][0]
                stop_gap, stop_rad = float(top[0][1] - top[1][1]), float(rads[k])
                n_final = n_done + k + 1
                break
            anchor = theta_k
            acts, G, floor_value = _candidates(space, anchor, reward, K, obs.pinv)
            i = k + 1
        if returned is None:
            total = sums[-1]
            n_done += C
    # unused rounds of the final block were never observed by the algorithm
    env.samples -= (n_done + C - n_final) * sigma
    assert math.isclose(stop_rad, gcb_radius(beta, n_final, delta), rel_tol=1e-9)
    assert stop_gap > 2 * L_p * stop_rad, "stop rule violated"
    rec.add_phase("exploration", n_final * sigma)
    rec.returned = returned
    rec.extra.update({"rounds": n_final, "runner_up": runner.bits(), "final_gap": stop_gap,
                      "final_radius": stop_rad, "oracle_calls": exact_calls})
    rec.wall_clock_ms = 1000 * (time.perf_counter() - t0)
    rec.check()
    return rec
