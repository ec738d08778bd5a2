"""Reward-aware top-k selection for the supported reward families."""
from __future__ import annotations

import math

import numpy as np

from ..actions import Action
from ..oracles import ActionSpace


class UnsupportedRewardError(ValueError):
    pass


def lipschitz_constant(space: ActionSpace, reward: str, mode: str = "tight") -> float:
    """Constant ``L_p`` with ``|rbar(x, a) - rbar(x, b)| <= L_p ||a - b||_2`` on all of X.

    ``tight`` gives the smallest valid constant: ``sqrt(m)`` for the linear
    reward and ``1 / sqrt(s_min)`` for the mean-normalized one (``s_min`` the
    smallest support size). ``conservative`` uses ``sqrt(m)`` for both.
    """
    if reward not in ("linear", "mean-normalized"):
        raise UnsupportedRewardError(f"no Lipschitz constant known for reward {reward!r}")
    if mode == "conservative" or reward == "linear":
        return math.sqrt(space.m)
    if mode != "tight":
        raise ValueError(f"unknown Lipschitz mode {mode!r}")
    return 1.0 / math.sqrt(min(space.cardinalities))


def reward_top(space: ActionSpace, theta, reward: str = "linear", k: int = 1
               ) -> list[tuple[Action, float]]:
    """The ``k`` actions of largest expected reward, value ties in lexicographic order.

    Mean-normalized rewards are handled per support-size class: within a class
    the reward is the linear value divided by a constant, so the linear k-best
    oracle applies, and the overall top-k is contained in the union of the
    per-class top-k lists.
    """
    theta = np.asarray(theta, dtype=float)
    if reward == "linear":
        return space.k_best(theta, k)
    if reward != "mean-normalized":
        raise UnsupportedRewardError(f"no oracle for reward {reward!r}")
    sizes = space.cardinalities
    if 0 in sizes:
        raise UnsupportedRewardError("mean-normalized reward undefined for the empty action")
    if len(sizes) == 1:
        s = sizes[0]
        return [(x, v / s) for x, v in space.k_best(theta, k)]
    merged = []
    for s in sizes:
        merged.extend((x, v / s) for x, v in space.k_best(theta, k, cardinality=s))
    merged.sort(key=lambda p: (-p[1], p[0]))
    return merged[:k]


def reward_matrix(actions: list[Action], reward: str) -> np.ndarray:
    """Rows ``w_x`` with ``rbar(x, theta) = w_x . theta`` for the linear-in-theta families."""
    X = np.vstack([a.vector for a in actions])
    if reward == "linear":
        return X
    if reward == "mean-normalized":
        return X / X.sum(axis=1, keepdims=True)
    raise UnsupportedRewardError(f"no oracle for reward {reward!r}")
