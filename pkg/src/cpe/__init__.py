"""Combinatorial pure exploration with full-bandit and partial linear feedback."""
from .actions import Action
from .core import EnvVector, GapProfile, InstanceDescriptor, NoiseSpec, gap_profile, reward_mean
from .design import SupportedDistribution, compute_lambda_alpha, mirror_descent_design
from .env import Environment, make_rng
from .oracles import DagPaths, PartitionMatroid, PerfectMatching, TopK

__all__ = [
    "Action", "DagPaths", "EnvVector", "Environment", "GapProfile", "InstanceDescriptor",
    "NoiseSpec", "PartitionMatroid", "PerfectMatching", "SupportedDistribution", "TopK",
    "compute_lambda_alpha", "gap_profile", "make_rng", "mirror_descent_design", "reward_mean",
]
