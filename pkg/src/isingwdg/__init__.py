"""Exact and Monte Carlo verification of cumulant decay and
weighted-dependency-graph central limit behavior in the Ising model."""

__version__ = "0.1.0"

from .gibbs_exact import (BoundaryCondition, ExactGibbs, IsingParams,
                          SpinConfiguration, exact_joint_cumulant,
                          hamiltonian, partition_function)
from .lattice import Box, l1_distance
from .patterns import GlobalPattern, LocalPattern
from .sampler import ChainSpec, SampleBatch, UpdateKind, run_chain
from .treelen import check_two_factor, mst_tree_length, steiner_tree_length
from .wdg import IsingWdgSpec, WeightedGraph, max_weight_spanning_tree

__all__ = [
    "__version__",
    "BoundaryCondition", "Box", "ChainSpec", "ExactGibbs", "GlobalPattern",
    "IsingParams", "IsingWdgSpec", "LocalPattern", "SampleBatch",
    "SpinConfiguration", "UpdateKind", "WeightedGraph", "check_two_factor",
    "exact_joint_cumulant", "hamiltonian", "l1_distance",
    "max_weight_spanning_tree", "mst_tree_length", "partition_function",
    "run_chain", "steiner_tree_length",
]
