"""Stochastic environments answering pulls, feedback matrix rules, observer sets."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .actions import Action
from .core import EnvVector, NoiseSpec, reward_value  # noqa: F401  (reward_value re-exported)
from .oracles import ActionSpace, span_basis

log = logging.getLogger(__name__)

_CHUNK = 1_000_000


class InfeasibleActionError(ValueError):
    pass


class ObserverSetError(ValueError):
    pass


def make_rng(seed: int, trial: int = 0) -> np.random.Generator:
    """Independent, reproducible stream for ``trial`` under base ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(trial),)))


# -- feedback matrix rules -----------------------------------------------------------

def full_bandit_matrix(x: Action) -> np.ndarray:
    return x.vector[None, :].copy()


def semi_bandit_matrix(x: Action) -> np.ndarray:
    return np.eye(x.d)[list(x.support)]


def top_entry_matrix(x: Action) -> np.ndarray:
    """Observe only the lowest-index (top-ranked) selected base arm."""
    if x.size == 0:
        raise ValueError("top-entry feedback undefined for the empty action")
    return np.eye(x.d)[[x.support[0]]]


class FeedbackRule:
    """Maps an action to its transformation matrix M_x (rows m_x by d)."""

    def __init__(self, rule: str = "full-bandit", matrices: dict[str, list] | None = None) -> None:
        self.rule = rule
        self._explicit = {}
        if rule == "explicit":
            for bits, mat in (matrices or {}).items():
                x = Action.from_string(bits)
                M = np.atleast_2d(np.asarray(mat, dtype=float))
                if M.shape[1] != x.d:
                    raise ValueError(f"matrix for {bits} has {M.shape[1]} columns, expected {x.d}")
                self._explicit[x] = M
        elif rule not in ("full-bandit", "semi-bandit", "top-entry"):
            raise ValueError(f"unknown feedback rule {rule!r}")

    @classmethod
    def from_json(cls, doc: dict | None) -> "FeedbackRule":
        doc = doc or {}
        return cls(doc.get("rule", "full-bandit"), doc.get("matrices"))

    def __call__(self, x: Action) -> np.ndarray:
        if self.rule == "full-bandit":
            return full_bandit_matrix(x)
        if self.rule == "semi-bandit":
            return semi_bandit_matrix(x)
        if self.rule == "top-entry":
            return top_entry_matrix(x)
        try:
            return self._explicit[x]
        except KeyError:
            raise ValueError(f"no feedback matrix registered for action {x.bits()}") from None


# -- environments ----------------------------------------------------------------------

class Environment:
    """Hidden parameter plus noise; counts every pull it answers."""

    def __init__(self, theta: EnvVector, noise: NoiseSpec | None = None,
                 rng: np.random.Generator | None = None, space: ActionSpace | None = None,
                 feedback: FeedbackRule | Callable[[Action], np.ndarray] | None = None) -> None:
        self.theta = theta
        self.noise = noise or NoiseSpec()
        self.rng = rng if rng is not None else np.random.default_rng()
        self.space = space
        self.feedback = feedback or FeedbackRule()
        self.samples = 0
        d = theta.d
        if self.noise.kind == "gaussian":
            sig = self.noise.sigma
            self._sigma = np.full(d, float(sig)) if np.isscalar(sig) else np.asarray(sig, float)
            if self._sigma.shape != (d,):
                raise ValueError("per-arm sigma length must equal d")

    @classmethod
    def for_instance(cls, instance, rng: np.random.Generator) -> "Environment":
        return cls(instance.theta, instance.noise, rng, instance.space,
                   FeedbackRule.from_json(instance.feedback))

    @property
    def d(self) -> int:
        return self.theta.d

    def _check(self, x: Action) -> None:
        if x.d != self.d:
            raise ValueError(f"action dimension {x.d} != d={self.d}")
        if self.space is not None and not self.space.contains(x):
            raise InfeasibleActionError(f"action {x.bits()} is not feasible")

    def _eta(self, shape: tuple[int, ...]) -> np.ndarray:
        kind = self.noise.kind
        if kind == "gaussian":
            return self.rng.standard_normal(shape + (self.d,)) * self._sigma
        if kind == "uniform-box":
            eta = self.rng.uniform(-self.noise.range, self.noise.range, shape + (self.d,))
            assert np.all(np.abs(eta) <= 1.0), "uniform-box noise left [-1, 1]^d"
            return eta
        return np.zeros(shape + (self.d,))

    def pull(self, x: Action) -> float:
        """Full-bandit reward ``x^T (theta + eta)``."""
        self._check(x)
        self.samples += 1
        mean = x.value(self.theta.theta)
        kind = self.noise.kind
        if kind == "none":
            return mean
        if kind == "scalar-gaussian":
            return mean + float(self.noise.sigma) * float(self.rng.standard_normal(1)[0])
        eta = self._eta(())
        return float(x.vector @ (self.theta.theta + eta))

    def pull_total(self, x: Action, count: int) -> float:
        """Sum of ``count`` independent full-bandit rewards of ``x``, drawn in aggregate."""
        self._check(x)
        count = int(count)
        if count < 0:
            raise ValueError("count must be nonnegative")
        self.samples += count
        if count == 0:
            return 0.0
        mean = count * x.value(self.theta.theta)
        kind = self.noise.kind
        if kind == "none":
            return mean
        if kind == "scalar-gaussian":
            return mean + float(self.noise.sigma) * np.sqrt(count) * float(self.rng.standard_normal())
        if kind == "gaussian":
            var = count * float(np.sum(self._sigma[list(x.support)] ** 2))
            return mean + np.sqrt(var) * float(self.rng.standard_normal())
        # uniform-box: exact summation of the bounded draws
        total = 0.0
        left = count * x.size
        r = self.noise.range
        while left > 0:
            k = min(left, _CHUNK)
            draw = self.rng.uniform(-r, r, k)
            assert np.all(np.abs(draw) <= 1.0), "uniform-box noise left [-1, 1]"
            total += float(draw.sum())
            left -= k
        return mean + total

    def feedback_matrix(self, x: Action) -> np.ndarray:
        return self.feedback(x)

    def pull_partial(self, x: Action) -> np.ndarray:
        """Transformed feedback ``M_x (theta + eta)``.

        Under ``scalar-gaussian`` noise each feedback row gets independent N(0, sigma^2).
        """
        self._check(x)
        M = self.feedback_matrix(x)
        self.samples += 1
        kind = self.noise.kind
        if kind == "none":
            return M @ self.theta.theta
        if kind == "scalar-gaussian":
            return M @ self.theta.theta + float(self.noise.sigma) * self.rng.standard_normal(M.shape[0])
        return M @ (self.theta.theta + self._eta(()))

    def observe_rounds(self, observer: "ObserverSet", rounds: int) -> np.ndarray:
        """Stacked feedback of ``rounds`` full passes over the observer set (rounds x rows)."""
        for x in observer.actions:
            self._check(x)
        self.samples += rounds * len(observer.actions)
        mean = observer.stacked @ self.theta.theta
        kind = self.noise.kind
        if kind == "none":
            return np.tile(mean, (rounds, 1))
        if kind == "scalar-gaussian":
            return mean + float(self.noise.sigma) * self.rng.standard_normal((rounds, mean.shape[0]))
        # only the noise coordinates a feedback matrix reads are drawn; the rest never matter
        out = np.empty((rounds, mean.shape[0]))
        start = 0
        for M in observer.matrices:
            cols = np.flatnonzero(np.any(M != 0, axis=0))
            rows = M.shape[0]
            if kind == "gaussian":
                eta = self.rng.standard_normal((rounds, cols.size)) * self._sigma[cols]
            else:
                eta = self.rng.uniform(-self.noise.range, self.noise.range, (rounds, cols.size))
            out[:, start:start + rows] = mean[start:start + rows] + eta @ M[:, cols].T
            start += rows
        return out


def pull_full_bandit(env: Environment, x: Action) -> float:
    return env.pull(x)


def pull_partial(env: Environment, x: Action) -> np.ndarray:
    return env.pull_partial(x)


# -- observer sets ---------------------------------------------------------------------

@dataclass
class ObserverSet:
    actions: list[Action]
    matrices: list[np.ndarray]
    stacked: np.ndarray
    pinv: np.ndarray
    beta_sigma: float
    beta_kind: str
    basis: np.ndarray
    rank: int

    @property
    def d(self) -> int:
        return self.stacked.shape[1]

    @property
    def reduced(self) -> bool:
        return self.rank < self.d

    def to_json(self) -> dict:
        return {"actions": [a.bits() for a in self.actions], "rank": self.rank,
                "beta_sigma": self.beta_sigma, "beta_kind": self.beta_kind}


def _is_identity_like(stacked: np.ndarray) -> bool:
    rows, d = stacked.shape
    if rows != d:
        return False
    is_unit = np.all((stacked == 0) | (stacked == 1)) and np.all(stacked.sum(axis=1) == 1)
    return bool(is_unit and np.all(stacked.sum(axis=0) == 1))


EXACT_GENERATOR_LIMIT = 20


def _merged_generators(pinv: np.ndarray, matrices: Sequence[np.ndarray]) -> np.ndarray:
    """Generators of the zonotope ``{pinv M_sigma eta : eta in [-1, 1]^(|sigma| d)}``.

    Parallel generators are merged, since only their summed length matters.
    """
    cols = []
    start = 0
    for M in matrices:
        rows = M.shape[0]
        cols.append(pinv[:, start:start + rows] @ M)
        start += rows
    G = np.hstack(cols)
    norms = np.linalg.norm(G, axis=0)
    scale = max(1.0, float(norms.max(initial=0.0)))
    merged: dict[tuple, np.ndarray] = {}
    for g, nrm in zip(G.T, norms):
        if nrm <= 1e-12 * scale:
            continue
        u = g / nrm
        pivot = u[np.argmax(np.abs(u) > 1e-9)]
        u = u if pivot > 0 else -u
        key = tuple(np.round(u, 9))
        merged[key] = merged.get(key, 0.0) + u * nrm
    if not merged:
        return np.zeros((pinv.shape[0], 0))
    return np.column_stack(list(merged.values()))


def box_error_constant(pinv: np.ndarray, matrices: Sequence[np.ndarray]) -> tuple[float, str]:
    """Largest single-round error ``||pinv M_sigma eta||_2`` over box noise ``eta in [-1, 1]``.

    Exact by vertex enumeration when at most ``EXACT_GENERATOR_LIMIT`` distinct
    generator directions remain; otherwise the coordinatewise bound
    ``sqrt(sum_j (sum_i ||row_j(B_i)||_1)^2)`` with ``B_i`` the block of ``pinv``
    for action ``i`` times ``M_i``.
    """
    G = _merged_generators(pinv, matrices)
    g = G.shape[1]
    if g <= EXACT_GENERATOR_LIMIT:
        best = 0.0
        # a sign flip of every generator leaves the norm unchanged, so fix the last sign
        free = max(g - 1, 0)
        fixed = G[:, -1] if g else np.zeros(G.shape[0])
        batch = 1 << min(free, 14)
        for lo in range(0, 1 << free, batch):
            idx = np.arange(lo, min(lo + batch, 1 << free))
            signs = ((idx[:, None] >> np.arange(free)) & 1) * 2.0 - 1.0
            pts = signs @ G[:, :free].T + fixed
            best = max(best, float(np.sqrt((pts ** 2).sum(axis=1)).max()))
        return best, "exact"
    row_l1 = np.zeros(pinv.shape[0])
    start = 0
    for M in matrices:
        rows = M.shape[0]
        row_l1 += np.abs(pinv[:, start:start + rows] @ M).sum(axis=1)
        start += rows
    return float(np.sqrt(np.sum(row_l1 ** 2))), "upper-bound"


def observer_from_actions(actions: Sequence[Action], matrices: Sequence[np.ndarray],
                          reduced: bool = False) -> ObserverSet:
    """Pseudo-inverse estimator and error constant for a given observer set."""
    stacked = np.vstack(matrices)
    d = stacked.shape[1]
    if reduced:
        _, s, vt = np.linalg.svd(stacked, full_matrices=False)
        r = int(np.sum(s > 1e-9 * max(1.0, s[0])))
        U = vt[:r].T
    else:
        U = np.eye(d)
        r = d
    K = stacked @ U
    gram = K.T @ K
    if np.linalg.eigvalsh(gram)[0] <= 1e-10:
        raise ObserverSetError(f"stacked feedback matrix has rank {np.linalg.matrix_rank(stacked)} < {r}")
    pinv = U @ np.linalg.solve(gram, K.T)
    check = pinv @ stacked
    target = U @ U.T
    if np.linalg.norm(check - target) > 1e-8:
        raise ObserverSetError("pseudo-inverse check failed")
    if not reduced and _is_identity_like(stacked):
        beta, kind = float(np.sqrt(d)), "exact"
    else:
        beta, kind = box_error_constant(pinv, matrices)
    return ObserverSet(list(actions), [np.asarray(M, float) for M in matrices], stacked, pinv,
                       beta, kind, U, r)


def build_observer_set(space: ActionSpace, matrix_rule: Callable[[Action], np.ndarray],
                       candidate_pool: Sequence[Action] | None = None,
                       target_rank: int | None = None) -> ObserverSet:
    """Greedily add pool actions that strictly raise the rank of the stacked matrix.

    ``target_rank`` defaults to ``d``; a smaller target yields an estimator of
    the projection of theta onto the row space of the stacked matrix.
    """
    pool = list(candidate_pool) if candidate_pool is not None else span_basis(space)[0]
    target = space.d if target_rank is None else int(target_rank)
    chosen, mats = [], []
    rank = 0
    stacked = np.zeros((0, space.d))
    for x in pool:
        if not space.contains(x):
            raise InfeasibleActionError(f"pool action {x.bits()} is not feasible")
        M = np.atleast_2d(matrix_rule(x))
        cand = np.vstack([stacked, M])
        r = int(np.linalg.matrix_rank(cand))
        if r > rank:
            chosen.append(x)
            mats.append(M)
            stacked, rank = cand, r
        if rank >= target:
            break
    if rank < target:
        raise ObserverSetError(f"observer pool reaches rank {rank} < required {target}")
    return observer_from_actions(chosen, mats, reduced=target < space.d)
