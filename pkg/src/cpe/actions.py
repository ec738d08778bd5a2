"""Binary incidence vectors over base arms."""
from __future__ import annotations

from functools import cached_property
from typing import Iterable, Sequence

import numpy as np


class Action:
    """A super arm: a subset of ``d`` base arms stored as a packed bit mask.

    Base arm 0 is the most significant bit, so integer comparison of masks is
    lexicographic comparison of the bit sequences ``(x_0, ..., x_{d-1})``.
    """

    __slots__ = ("d", "mask", "__dict__")

    def __init__(self, d: int, mask: int) -> None:
        if d < 1:
            raise ValueError("dimension must be positive")
        if mask < 0 or mask >> d:
            raise ValueError(f"mask {mask} does not fit in {d} bits")
        object.__setattr__(self, "d", int(d))
        object.__setattr__(self, "mask", int(mask))

    def __setattr__(self, name, value):
        raise AttributeError("Action is immutable")

    @classmethod
    def from_support(cls, d: int, support: Iterable[int]) -> "Action":
        mask = 0
        for i in support:
            if not 0 <= i < d:
                raise ValueError(f"base arm {i} out of range for d={d}")
            mask |= 1 << (d - 1 - i)
        return cls(d, mask)

    @classmethod
    def from_bits(cls, bits: Sequence[int] | np.ndarray) -> "Action":
        bits = [int(b) for b in bits]
        if any(b not in (0, 1) for b in bits):
            raise ValueError("action bits must be 0/1")
        return cls.from_support(len(bits), [i for i, b in enumerate(bits) if b])

    @classmethod
    def from_string(cls, s: str) -> "Action":
        return cls.from_bits([int(c) for c in s.strip()])

    def has(self, i: int) -> bool:
        return bool((self.mask >> (self.d - 1 - i)) & 1)

    @cached_property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.d) if self.has(i))

    @cached_property
    def vector(self) -> np.ndarray:
        v = np.zeros(self.d)
        v[list(self.support)] = 1.0
        v.setflags(write=False)
        return v

    @property
    def size(self) -> int:
        return len(self.support)

    def bits(self) -> str:
        return format(self.mask, f"0{self.d}b")

    def value(self, weights: np.ndarray) -> float:
        """Return ``x^T w``."""
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (self.d,):
            raise ValueError(f"weights of shape {weights.shape} for action of dimension {self.d}")
        return float(weights[list(self.support)].sum()) if self.support else 0.0

    def _key(self):
        return (self.d, self.mask)

    def __eq__(self, other):
        if not isinstance(other, Action):
            return NotImplemented
        return self._key() == other._key()

    def __lt__(self, other: "Action") -> bool:
        return self._key() < other._key()

    def __le__(self, other: "Action") -> bool:
        return self._key() <= other._key()

    def __gt__(self, other: "Action") -> bool:
        return self._key() > other._key()

    def __ge__(self, other: "Action") -> bool:
        return self._key() >= other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def __repr__(self) -> str:
        return f"Action({self.bits()})"


def stack(actions: Sequence[Action]) -> np.ndarray:
    """Rows are the incidence vectors of ``actions``."""
    if not actions:
        raise ValueError("no actions to stack")
    return np.vstack([a.vector for a in actions])
