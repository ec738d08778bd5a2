"""Domain types shared across the package: parameters, noise, instances, gaps."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .actions import Action
from .oracles import (DEFAULT_ENUMERATION_CAP, ActionSpace, EnumerationCapError,
                      space_from_json)

NOISE_KINDS = ("gaussian", "uniform-box", "scalar-gaussian", "none")
REWARD_KINDS = ("linear", "mean-normalized")
FEEDBACK_RULES = ("full-bandit", "semi-bandit", "top-entry", "explicit")


class NonUniqueOptimumError(ValueError):
    pass


@dataclass(frozen=True)
class EnvVector:
    theta: np.ndarray
    norm_bound: float

    def __post_init__(self) -> None:
        theta = np.array(self.theta, dtype=float)
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        norm = float(np.linalg.norm(theta))
        if norm > self.norm_bound * (1 + 1e-12):
            raise ValueError(f"||theta||_2 = {norm:.6g} exceeds norm bound {self.norm_bound:.6g}")

    @classmethod
    def tight(cls, theta) -> "EnvVector":
        theta = np.asarray(theta, dtype=float)
        return cls(theta, float(np.linalg.norm(theta)))

    @property
    def d(self) -> int:
        return self.theta.shape[0]


@dataclass(frozen=True)
class NoiseSpec:
    """Noise model. ``sigma`` is a scalar or a per-base-arm list for ``gaussian``."""

    kind: str = "scalar-gaussian"
    sigma: float | tuple[float, ...] = 1.0
    range: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        sig = self.sigma
        if isinstance(sig, (list, tuple, np.ndarray)):
            sig = tuple(float(s) for s in sig)
            object.__setattr__(self, "sigma", sig)
            if self.kind != "gaussian":
                raise ValueError("per-arm sigma only applies to gaussian noise")
            if any(s < 0 for s in sig):
                raise ValueError("sigma must be nonnegative")
        elif float(sig) < 0:
            raise ValueError("sigma must be nonnegative")
        if not 0 <= self.range <= 1:
            raise ValueError("uniform-box range must lie in [0, 1]")

    def to_json(self) -> dict:
        if self.kind == "none":
            return {"kind": "none"}
        if self.kind == "uniform-box":
            return {"kind": "uniform-box", "range": self.range}
        sig = list(self.sigma) if isinstance(self.sigma, tuple) else float(self.sigma)
        return {"kind": self.kind, "sigma": sig}

    @classmethod
    def from_json(cls, doc: dict | None) -> "NoiseSpec":
        if not doc:
            return cls()
        return cls(kind=doc.get("kind", "scalar-gaussian"), sigma=doc.get("sigma", 1.0),
                   range=doc.get("range", 1.0))


@dataclass(frozen=True)
class GapProfile:
    sorted_values: tuple[float, ...]
    actions: tuple[Action, ...]

    @property
    def best(self) -> Action:
        return self.actions[0]

    def delta(self, i: int) -> float:
        """Gap between the best and the ``i``-th best action (1-based)."""
        return self.sorted_values[0] - self.sorted_values[i - 1]

    @property
    def delta_min(self) -> float:
        if len(self.sorted_values) < 2:
            raise ValueError("delta_min undefined: the action space has a single action")
        return self.delta(2)


def reward_mean(x: Action, env: EnvVector) -> float:
    """Noiseless full-bandit reward ``x^T theta``."""
    if x.d != env.d:
        raise ValueError(f"action dimension {x.d} != parameter dimension {env.d}")
    return x.value(env.theta)


def reward_value(x: Action, theta: EnvVector | np.ndarray, reward_kind: str = "linear") -> float:
    """Expected reward ``x^T theta`` or its mean-normalized form ``x^T theta / |x|_1``."""
    th = theta.theta if isinstance(theta, EnvVector) else np.asarray(theta, dtype=float)
    if reward_kind == "linear":
        return x.value(th)
    if reward_kind == "mean-normalized":
        if x.size == 0:
            raise ValueError("mean-normalized reward undefined for the empty action")
        return x.value(th) / x.size
    raise ValueError(f"unknown reward kind {reward_kind!r}")


@dataclass
class InstanceDescriptor:
    d: int
    space: ActionSpace
    theta: EnvVector
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    reward: str = "linear"
    feedback: dict = field(default_factory=lambda: {"rule": "full-bandit"})
    seed: int | None = None
    name: str = ""
    extra: dict = field(default_factory=dict)
    enumeration_cap: int = 10**5
    validate: bool = True

    def __post_init__(self) -> None:
        if self.space.d != self.d or self.theta.d != self.d:
            raise ValueError("structure, theta and d disagree on dimension")
        if self.reward not in REWARD_KINDS:
            raise ValueError(f"reward must be one of {REWARD_KINDS}")
        if self.feedback.get("rule", "full-bandit") not in FEEDBACK_RULES:
            raise ValueError(f"feedback rule must be one of {FEEDBACK_RULES}")
        if self.validate and self.space.count() <= self.enumeration_cap:
            if self.space.count() > 1:
                prof = gap_profile(self, cap=self.enumeration_cap)
                if not prof.delta_min > 0:
                    raise NonUniqueOptimumError(
                        f"optimal action is not unique (tie at value {prof.sorted_values[0]:.6g})")

    @property
    def m(self) -> int:
        return self.space.m

    def optimum(self) -> Action:
        """The true best action under ``reward`` (via the oracle, no enumeration)."""
        from .algorithms.rewards import reward_top

        return reward_top(self.space, self.theta.theta, self.reward, 1)[0][0]

    def to_json(self) -> dict:
        doc: dict[str, Any] = {
            "d": self.d,
            "structure": self.space.to_json(),
            "theta": [float(t) for t in self.theta.theta],
            "norm_bound": float(self.theta.norm_bound),
            "noise": self.noise.to_json(),
            "reward": self.reward,
            "feedback": self.feedback,
        }
        if self.seed is not None:
            doc["seed"] = self.seed
        if self.name:
            doc["name"] = self.name
        if self.extra:
            doc["extra"] = self.extra
        return doc

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, doc: dict, validate: bool = True) -> "InstanceDescriptor":
        d = int(doc["d"])
        space = space_from_json(d, doc["structure"])
        theta = np.asarray(doc["theta"], dtype=float)
        if theta.shape != (d,):
            raise ValueError(f"theta has length {theta.shape[0]}, expected d={d}")
        bound = float(doc.get("norm_bound", np.linalg.norm(theta)))
        return cls(d=d, space=space, theta=EnvVector(theta, bound),
                   noise=NoiseSpec.from_json(doc.get("noise")),
                   reward=doc.get("reward", "linear"),
                   feedback=doc.get("feedback", {"rule": "full-bandit"}),
                   seed=doc.get("seed"), name=doc.get("name", ""),
                   extra=doc.get("extra", {}), validate=validate)

    @classmethod
    def load(cls, path) -> "InstanceDescriptor":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps() + "\n")


def gap_profile(instance: InstanceDescriptor, cap: int = DEFAULT_ENUMERATION_CAP,
                reward: str | None = None) -> GapProfile:
    """Exact sorted values over all of X; ties ordered lexicographically."""
    reward = reward or instance.reward
    n = instance.space.count()
    if n > cap:
        raise EnumerationCapError(f"|X| = {n} exceeds enumeration cap {cap}")
    actions = instance.space.enumerate(cap)
    vals = [reward_value(x, instance.theta, reward) for x in actions]
    order = sorted(range(len(actions)), key=lambda i: (-vals[i], actions[i]))
    return GapProfile(tuple(vals[i] for i in order), tuple(actions[i] for i in order))
