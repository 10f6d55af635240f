"""Run the solver on top of another discovery method's output graph.

Methods that ignore undersampling report a confounded pair as a 2-cycle.
Enrichment turns every 2-cycle into a bidirected edge (high weight) and
demotes both directions to a low weight, since at least one of them is
usually real but which one is uncertain.
"""
from __future__ import annotations

from dataclasses import dataclass

from .graph_core import DirectedGraph, MixedGraph, WeightedHypothesis
from .solver import SolutionSet, SolverConfig, solve


@dataclass(frozen=True)
class EnrichmentPolicy:
    w_bidirected: int = 10
    w_twocycle_directed: int = 2
    w_directed: int = 5
    w_absent: int = 10

    def __post_init__(self):
        for name in ("w_bidirected", "w_twocycle_directed", "w_directed", "w_absent"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.w_twocycle_directed >= self.w_directed:
            raise ValueError("w_twocycle_directed must be below w_directed")

    @classmethod
    def parse(cls, text: str) -> "EnrichmentPolicy":
        """``wb:wt:wd:wa``"""
        parts = text.split(":")
        if len(parts) != 4:
            raise ValueError(f"policy must be wb:wt:wd:wa, got {text!r}")
        return cls(*(int(p) for p in parts))


def two_cycles(g: DirectedGraph) -> list[tuple[int, int]]:
    """Pairs (i, j), i < j, with both i->j and j->i."""
    both = g.adj & g.adj.T
    return [(i, j) for i, j in g.edges() if i < j and both[i - 1, j - 1]]


def enrich(first_order: DirectedGraph, policy: EnrichmentPolicy | None = None) -> WeightedHypothesis:
    policy = policy or EnrichmentPolicy()
    cycles = two_cycles(first_order)
    in_cycle = {e for i, j in cycles for e in ((i, j), (j, i))}
    directed = {
        e: policy.w_twocycle_directed if e in in_cycle else policy.w_directed
        for e in first_order.edges()
    }
    bidirected = {pair: policy.w_bidirected for pair in cycles}
    return WeightedHypothesis.from_weights(
        first_order.n, directed, bidirected, policy.w_absent, policy.w_absent
    )


def first_order_view(observed: MixedGraph) -> DirectedGraph:
    """What a method blind to undersampling reports: bidirected pairs become 2-cycles."""
    adj = observed.directed | observed.bidirected_matrix
    return DirectedGraph(observed.n, adj)


def meta_solve(
    first_order: DirectedGraph,
    policy: EnrichmentPolicy | None = None,
    cfg: SolverConfig | None = None,
) -> SolutionSet:
    return solve(enrich(first_order, policy), cfg)
