"""Estimators of the environment vector and their confidence radii."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .actions import Action
from .design import DesignError, SupportedDistribution, design_matrix, spd_inverse


@dataclass(frozen=True)
class SampleBudget:
    n: int

    def __post_init__(self) -> None:
        if int(self.n) < 1:
            raise ValueError("sample budget must be at least 1")
        object.__setattr__(self, "n", int(self.n))


def _projected_inverse(lam: SupportedDistribution, basis: np.ndarray | None) -> np.ndarray:
    """``M(lambda)^{-1}``, or ``U (U^T M U)^{-1} U^T`` when a span basis is given."""
    M = design_matrix(lam)
    U = np.eye(M.shape[0]) if basis is None else basis
    Mz = U.T @ M @ U
    ev = np.linalg.eigvalsh(Mz)
    if ev[0] <= 1e-10 * max(1.0, float(np.trace(Mz))):
        raise DesignError(f"design matrix is singular (smallest eigenvalue {ev[0]:.3g})")
    return U @ spd_inverse(Mz) @ U.T


def vector_est(lam: SupportedDistribution, n: int | SampleBudget, env,
               rng: np.random.Generator | None = None, basis: np.ndarray | None = None,
               M_inv: np.ndarray | None = None) -> np.ndarray:
    """Randomized least squares: draw ``n`` actions from ``lam``, pull them, return ``(n M)^{-1} b``.

    The normalizer is the expected design ``n * M(lambda)``, not the empirical
    one, which makes the estimate unbiased. Actions are drawn as a multinomial
    count vector and each support action's rewards are summed in one call to
    ``env.pull_total``; this is equal in distribution to pulling one by one.
    """
    n = n.n if isinstance(n, SampleBudget) else int(n)
    if n < 1:
        raise ValueError("sample budget must be at least 1")
    rng = rng if rng is not None else env.rng
    Minv = _projected_inverse(lam, basis) if M_inv is None else M_inv
    counts = rng.multinomial(n, lam.probs)
    b = np.zeros(lam.d)
    for x, c in zip(lam.support, counts):
        if c:
            b += env.pull_total(x, int(c)) * x.vector
    return Minv @ b / n


def ell(eps: float, m: int, d: int, alpha: float) -> float:
    """Per-round sample factor ``(2m + 2 alpha sqrt(m) d + 4 alpha^2 d + alpha eps d) / eps^2``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return (2 * m + 2 * alpha * math.sqrt(m) * d + 4 * alpha ** 2 * d + alpha * eps * d) / eps ** 2


def elimination_budget(eps: float, d: int, n_actions: int, delta: float, c0: float,
                       scale: float = 1.0) -> int:
    """Samples for one elimination round at accuracy ``eps`` over ``n_actions`` candidates."""
    half = eps / 2
    raw = c0 * (2 + (6 + half) * d) / half ** 2 * math.log(5 * n_actions / delta)
    return max(1, math.ceil(scale * raw))


# -- regularized least squares -----------------------------------------------------

@dataclass
class RegularizedState:
    """``A = iota I + sum x x^T`` and ``b = sum r x``; ``A^{-1}`` kept by Sherman-Morrison."""

    d: int
    iota: float = 1.0
    kappa: float = 1.0
    L: float = 1.0
    m: int = 1
    t: int = 0
    A: np.ndarray = field(default=None)  # type: ignore[assignment]
    b: np.ndarray = field(default=None)  # type: ignore[assignment]
    A_inv: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.iota <= 0:
            raise ValueError("regularizer iota must be positive")
        if self.A is None:
            self.A = self.iota * np.eye(self.d)
        if self.b is None:
            self.b = np.zeros(self.d)
        if self.A_inv is None:
            self.A_inv = np.linalg.inv(self.A)

    def copy(self) -> "RegularizedState":
        return replace(self, A=self.A.copy(), b=self.b.copy(), A_inv=self.A_inv.copy())

    def update(self, x: Action, r: float) -> None:
        """In-place rank-one update with one observation ``(x, r)``."""
        v = x.vector
        self.A += np.outer(v, v)
        self.b += r * v
        Av = self.A_inv @ v
        self.A_inv -= np.outer(Av, Av) / (1.0 + v @ Av)
        self.t += 1

    def estimate(self) -> np.ndarray:
        return self.A_inv @ self.b

    def confidence_scale(self, delta: float) -> float:
        """``kappa sqrt(d log((1 + t m / iota) / delta)) + sqrt(iota) L``."""
        if not 0 < delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        inner = math.log((1 + self.t * self.m / self.iota) / delta)
        return self.kappa * math.sqrt(self.d * inner) + math.sqrt(self.iota) * self.L

    def radii(self, delta: float) -> np.ndarray:
        return self.confidence_scale(delta) * np.sqrt(np.diag(self.A_inv))


def reg_ls_update(state: RegularizedState, x: Action, r: float) -> RegularizedState:
    """Functional form of :meth:`RegularizedState.update`."""
    new = state.copy()
    new.update(x, r)
    return new


def clucb_radius(state: RegularizedState, e: int, delta: float) -> float:
    if not 0 <= e < state.d:
        raise IndexError(f"base arm {e} out of range for d={state.d}")
    return state.confidence_scale(delta) * math.sqrt(state.A_inv[e, e])


# -- pseudo-inverse estimator ----------------------------------------------------------

def gcb_estimate(observer, stacked_feedback) -> np.ndarray:
    """``M_sigma^+ y``. ``observer`` is an ObserverSet or a full-column-rank stacked matrix."""
    y = np.asarray(stacked_feedback, dtype=float)
    if isinstance(observer, np.ndarray) or isinstance(observer, list):
        M = np.atleast_2d(np.asarray(observer, dtype=float))
        gram = M.T @ M
        if np.linalg.eigvalsh(gram)[0] <= 1e-10:
            raise ValueError(f"stacked matrix has rank {np.linalg.matrix_rank(M)} < {M.shape[1]}")
        pinv = np.linalg.solve(gram, M.T)
    else:
        pinv = observer.pinv
    if y.shape[-1] != pinv.shape[1]:
        raise ValueError(f"feedback length {y.shape[-1]} != stacked rows {pinv.shape[1]}")
    return y @ pinv.T


def gcb_radius(beta_sigma: float, n: int, delta: float) -> float:
    """Global radius ``sqrt(2 beta^2 log(4 n^2 e^2 / delta) / n)``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    return math.sqrt(2 * beta_sigma ** 2 * math.log(4 * n * n * math.e ** 2 / delta) / n)
