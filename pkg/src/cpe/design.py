"""G-optimal design over a finite action set.

When the actions do not span R^d, designs are computed in the coordinates of
an orthonormal basis ``U`` of their span. Quadratic forms ``x^T M^{-1} x``
then use the pseudo-inverse, which agrees with the inverse whenever the span
is full.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .actions import Action, stack
from .oracles import ActionSpace, rank_basis, span_basis

log = logging.getLogger(__name__)


class DesignError(ValueError):
    """Singular or numerically broken design."""


@dataclass
class SupportedDistribution:
    support: list[Action]
    probs: np.ndarray
    objective: float | None = None
    converged: bool = True
    iterations: int = 0

    def __post_init__(self) -> None:
        self.probs = np.asarray(self.probs, dtype=float)
        if len(self.support) == 0 or len(self.support) != self.probs.shape[0]:
            raise ValueError("support and probabilities must be nonempty and of equal length")
        if np.any(self.probs < 0) or abs(self.probs.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        if len(set(self.support)) != len(self.support):
            raise ValueError("support actions must be distinct")

    @classmethod
    def uniform(cls, support: Sequence[Action]) -> "SupportedDistribution":
        n = len(support)
        return cls(list(support), np.full(n, 1.0 / n))

    @property
    def d(self) -> int:
        return self.support[0].d


@dataclass
class DesignInfo:
    lam: SupportedDistribution
    M: np.ndarray
    M_inv: np.ndarray
    M_tilde: np.ndarray
    xi_min_tilde: float
    alpha: float
    basis: np.ndarray
    rank: int
    m: int
    notes: list[str] = field(default_factory=list)

    def norm_sq(self, x: Action) -> float:
        """``x^T M(lambda)^{-1} x`` (pseudo-inverse on a deficient span)."""
        v = x.vector
        return float(v @ self.M_inv @ v)

    def to_json(self) -> dict:
        return {
            "support": [a.bits() for a in self.lam.support],
            "probs": [float(p) for p in self.lam.probs],
            "objective": self.lam.objective,
            "converged": self.lam.converged,
            "iterations": self.lam.iterations,
            "xi_min_tilde": self.xi_min_tilde,
            "alpha": self.alpha,
            "rank": self.rank,
            "d": int(self.M.shape[0]),
            "m": self.m,
            "notes": self.notes,
        }


def design_matrix(lam: SupportedDistribution) -> np.ndarray:
    """``M(lambda) = sum_x lambda(x) x x^T``."""
    X = stack(lam.support)
    return X.T @ (lam.probs[:, None] * X)


def min_eigenvalue(M: np.ndarray) -> float:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-10:
        raise ValueError("matrix is not symmetric")
    return float(np.linalg.eigvalsh((M + M.T) / 2)[0])


def spd_inverse(M: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix via Cholesky.

    A jitter of ``1e-12 * trace(M) / d`` is added only if the plain factorization fails.
    """
    d = M.shape[0]
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * float(np.trace(M)) / d
        try:
            L = np.linalg.cholesky(M + jitter * np.eye(d))
        except np.linalg.LinAlgError as exc:
            raise DesignError("design matrix is not positive definite") from exc
    pivot = float(np.min(np.diag(L))) ** 2
    if pivot <= 1e-10 * float(np.trace(M)) / d:
        raise DesignError(f"design matrix is numerically singular (pivot {pivot:.3g})")
    Linv = np.linalg.solve(L, np.eye(d))
    inv = Linv.T @ Linv
    if not np.all(np.isfinite(inv)):
        raise DesignError("numerical breakdown inverting the design matrix")
    return inv


def orthonormal_span(actions: Sequence[Action], tol: float = 1e-9) -> np.ndarray:
    """Columns form an orthonormal basis of span(actions)."""
    X = stack(actions)
    _, s, vt = np.linalg.svd(X, full_matrices=False)
    r = int(np.sum(s > tol * max(1.0, s[0])))
    return vt[:r].T.copy()


def _quad_forms(Z: np.ndarray, probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    M = Z.T @ (probs[:, None] * Z)
    Minv = spd_inverse(M)
    return np.einsum("ij,jk,ik->i", Z, Minv, Z), M


def mirror_descent_design(support: Sequence[Action], L_f: float | None = None, eps: float = 1e-2,
                          max_iters: int = 50_000, basis: np.ndarray | None = None
                          ) -> SupportedDistribution:
    """Entropic mirror descent for ``min_lambda max_x x^T M(lambda)^{-1} x`` over ``support``.

    ``basis`` (d x r, orthonormal columns) selects the coordinates in which the
    design is computed; the stopping target is then ``r`` instead of ``d``.
    ``L_f`` defaults to the largest quadratic form at the uniform start.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    support = list(support)
    X = stack(support)
    Z = X if basis is None else X @ basis
    n, r = Z.shape
    gram = Z.T @ Z
    if np.linalg.matrix_rank(gram, tol=1e-10 * max(1.0, np.trace(gram))) < r:
        raise DesignError(f"support spans rank {np.linalg.matrix_rank(gram)} < {r}")
    probs = np.full(n, 1.0 / n)
    G, _ = _quad_forms(Z, probs)
    if L_f is None:
        L_f = float(G.max())
    log_n = math.log(n)
    t = 1
    while abs(G.max()) - r >= eps:
        if t > max_iters:
            log.warning("mirror descent stopped at max_iters=%d with objective %.6g (target %d)",
                        max_iters, G.max(), r)
            return SupportedDistribution(support, probs, float(G.max()), False, t - 1)
        step = math.sqrt(2 * log_n) / (L_f * math.sqrt(t))
        logits = np.log(probs) + step * G
        logits -= logits.max()
        probs = np.exp(logits)
        probs /= probs.sum()
        G, _ = _quad_forms(Z, probs)
        t += 1
    return SupportedDistribution(support, probs, float(G.max()), True, t - 1)


def design_objective(lam: SupportedDistribution, actions: Sequence[Action] | None = None,
                     basis: np.ndarray | None = None) -> float:
    """``max_x x^T M(lambda)^{-1} x`` over ``actions`` (default: the support)."""
    U = basis if basis is not None else np.eye(lam.d)
    Zs = stack(lam.support) @ U
    Minv = spd_inverse(Zs.T @ (lam.probs[:, None] * Zs))
    Z = stack(list(actions) if actions is not None else lam.support) @ U
    return float(np.einsum("ij,jk,ik->i", Z, Minv, Z).max())


def compute_lambda_alpha(space: ActionSpace, m: int | None = None, eps: float = 1e-2,
                         max_iters: int = 50_000, allow_deficient: bool = False) -> DesignInfo:
    """Design on a maximal independent set of feasible actions and its ratio ``alpha``.

    With ``allow_deficient`` the design lives on span(X) when X does not span
    R^d; ``alpha`` then uses the span rank in place of ``d``.
    """
    m = space.m if m is None else m
    if allow_deficient:
        basis_actions, U = span_basis(space)
    else:
        basis_actions = rank_basis(space)
        U = np.eye(space.d)
    r = U.shape[1]
    lam = mirror_descent_design(basis_actions, eps=eps, max_iters=max_iters, basis=U)
    M = design_matrix(lam)
    Mz_inv = spd_inverse(U.T @ M @ U)
    M_inv = U @ Mz_inv @ U.T
    X = stack(lam.support)
    M_tilde = X.T @ X
    xi = min_eigenvalue(U.T @ M_tilde @ U)
    if xi <= 0:
        raise DesignError("restricted design has a singular M_tilde")
    notes = [] if r == space.d else [f"actions span rank {r} < d={space.d}; design on span(X)"]
    return DesignInfo(lam=lam, M=M, M_inv=M_inv, M_tilde=M_tilde, xi_min_tilde=xi,
                      alpha=math.sqrt(m * r / xi), basis=U, rank=r, m=m, notes=notes)
