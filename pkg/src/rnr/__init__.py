"""Recover causal-timescale graphs from undersampled, noisy observed graphs."""

__version__ = "0.1.0"

from ._kernels import KERNEL_BACKEND
from .graph_core import (
    DirectedGraph,
    MixedGraph,
    SccInfo,
    WeightedHypothesis,
    parse_graph,
    scc_decompose,
    write_graph,
)
from .objective import CostVector, DensityBand, adaptive_weights, cost
from .solver import OptMode, SolutionSet, SolverConfig, lower_bound, solve, solve_bruteforce
from .undersampling import undersample, undersample_oracle

__all__ = [
    "KERNEL_BACKEND",
    "CostVector",
    "DensityBand",
    "DirectedGraph",
    "MixedGraph",
    "OptMode",
    "SccInfo",
    "SolutionSet",
    "SolverConfig",
    "WeightedHypothesis",
    "adaptive_weights",
    "cost",
    "lower_bound",
    "parse_graph",
    "scc_decompose",
    "solve",
    "solve_bruteforce",
    "undersample",
    "undersample_oracle",
    "write_graph",
]
