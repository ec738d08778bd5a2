"""Run configuration, per-run records and shared bookkeeping."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..actions import Action

PI_FACTOR = 6 / math.pi ** 2


class RoundCapError(RuntimeError):
    """An elimination or preparation loop exceeded its round cap."""


@dataclass
class RunConfig:
    delta: float = 0.05
    sample_scale: float = 1.0
    seed: int = 0
    mirror_eps: float = 1e-2
    mirror_max_iters: int = 50_000
    round_cap: int = 40
    enumeration_cap: int = 10**5
    eps: float = 0.1              # accuracy for CLUNCB
    kappa: float = 1.0            # sub-Gaussian constant in CLUNCB
    iota: float | None = None     # CLUNCB regularizer; None picks a default
    max_pulls: int = 10**7        # CLUNCB pull cap
    max_rounds: int = 10**10      # GCB-PE exploration round cap
    chunk_rounds: int = 20_000    # GCB-PE rounds simulated per vectorized block
    candidates: int = 0           # GCB-PE candidate list size (0 picks 2d + 2)
    lipschitz: str = "tight"      # GCB-PE reward Lipschitz constant: tight | conservative

    def __post_init__(self) -> None:
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.sample_scale <= 0:
            raise ValueError("sample_scale must be positive")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class PhaseRecord:
    label: str
    samples: int
    epsilon: float | None = None


@dataclass
class RunRecord:
    algo: str
    returned: Action | None = None
    total_samples: int = 0
    wall_clock_ms: float = 0.0
    correct: bool | None = None
    per_phase: list[PhaseRecord] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def add_phase(self, label: str, samples: int, epsilon: float | None = None) -> None:
        self.per_phase.append(PhaseRecord(label, int(samples), epsilon))
        self.total_samples += int(samples)

    def check(self) -> None:
        assert self.total_samples == sum(p.samples for p in self.per_phase)

    def to_json(self) -> dict:
        return {
            "algo": self.algo,
            "returned": None if self.returned is None else self.returned.bits(),
            "total_samples": self.total_samples,
            "wall_clock_ms": self.wall_clock_ms,
            "correct": self.correct,
            "per_phase": [asdict(p) for p in self.per_phase],
            "notes": self.notes,
            "extra": self.extra,
        }


def c0_constant(L: float) -> float:
    return max(4 * L * L, 3.0)


def lex_argmax(values: np.ndarray) -> int:
    """Index of the largest value; the first index wins ties (callers pass lex-sorted candidates)."""
    return int(np.argmax(values))
