from .budget import theoretical_budget
from .cluncb import clucb
from .common import PhaseRecord, RoundCapError, RunConfig, RunRecord
from .elimination import alba, elim_til
from .gcbpe import gcb_pe, observer_for_instance
from .polyalba import alba_full, poly_alba
from .rewards import lipschitz_constant, reward_top

__all__ = [
    "PhaseRecord", "RoundCapError", "RunConfig", "RunRecord", "alba", "alba_full", "clucb",
    "elim_til", "gcb_pe", "lipschitz_constant", "observer_for_instance", "poly_alba",
    "reward_top", "theoretical_budget",
]
