"""Weighted disagreement between an observed graph and an undersampled candidate."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Mapping

import numpy as np

from .graph_core import DirectedGraph, MixedGraph, WeightedHypothesis
from .undersampling import undersample_matrices

LEX = "lex"
FLAT = "flat"


@dataclass(frozen=True, order=True)
class CostVector:
    """Ordered lexicographically: density first, then bidirected, then directed."""

    density_violation: int = 0
    bidirected_cost: int = 0
    directed_cost: int = 0

    @property
    def total(self) -> int:
        return self.density_violation + self.bidirected_cost + self.directed_cost

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.density_violation, self.bidirected_cost, self.directed_cost)

    def key(self, priority: str = LEX):
        """Sort key under the given priority scheme."""
        if priority == FLAT:
            return self.total
        return self.as_tuple()

    def __str__(self):
        return f"{self.density_violation},{self.bidirected_cost},{self.directed_cost}"

    @classmethod
    def parse(cls, text: str) -> "CostVector":
        parts = [int(p) for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"cost needs three comma-separated integers: {text!r}")
        return cls(*parts)


ZERO_COST = CostVector(0, 0, 0)


@dataclass(frozen=True)
class DensityBand:
    """Inclusive bounds on the number of directed edges of a candidate."""

    d_min: int
    d_max: int

    def __post_init__(self):
        if not 0 <= self.d_min <= self.d_max:
            raise ValueError(f"invalid density band {self.d_min}:{self.d_max}")

    @classmethod
    def inactive(cls, n: int) -> "DensityBand":
        return cls(0, n * n)

    @classmethod
    def matched(cls, hyp: WeightedHypothesis | MixedGraph, spread: float = 0.25) -> "DensityBand":
        """Band of +-``spread`` around the directed-edge count of the observed graph."""
        graph = hyp.graph if isinstance(hyp, WeightedHypothesis) else hyp
        m = int(graph.directed.sum())
        hi = min(graph.n * graph.n, math.ceil(m * (1 + spread)))
        return cls(max(0, math.floor(m * (1 - spread))), hi)

    @classmethod
    def parse(cls, text: str) -> "DensityBand":
        lo, sep, hi = text.partition(":")
        if not sep:
            raise ValueError(f"density band must look like <min>:<max>, got {text!r}")
        return cls(int(lo), int(hi))

    def violation(self, n_edges: int) -> int:
        if n_edges < self.d_min:
            return self.d_min - n_edges
        if n_edges > self.d_max:
            return n_edges - self.d_max
        return 0

    def check(self, n: int) -> None:
        if self.d_max > n * n:
            raise ValueError(f"density band max {self.d_max} exceeds n^2 = {n * n}")


def _disagreement(
    hyp: WeightedHypothesis, directed: np.ndarray, bid: np.ndarray
) -> tuple[int, int]:
    g = hyp.graph
    hd = g.directed
    dir_cost = int(hyp.presence_d[hd & ~directed].sum() + hyp.absence_d[~hd & directed].sum())
    hb = np.triu(g.bidirected_matrix, 1)
    mb = np.triu(bid, 1)
    bid_cost = int(hyp.presence_b[hb & ~mb].sum() + hyp.absence_b[~hb & mb].sum())
    return bid_cost, dir_cost


def cost(
    candidate: DirectedGraph,
    u: int,
    hyp: WeightedHypothesis,
    band: DensityBand | None = None,
) -> CostVector:
    """Disagreement between ``hyp`` and the candidate undersampled at rate ``u``."""
    if candidate.n != hyp.n:
        raise ValueError(f"candidate has {candidate.n} nodes, hypothesis has {hyp.n}")
    directed, bid = undersample_matrices(candidate.adj, u)
    bid_cost, dir_cost = _disagreement(hyp, directed, bid)
    dens = band.violation(candidate.n_edges) if band is not None else 0
    return CostVector(dens, bid_cost, dir_cost)


def mixed_cost(observed: MixedGraph, hyp: WeightedHypothesis) -> CostVector:
    """Disagreement of an already-undersampled graph with ``hyp`` (no density term)."""
    bid_cost, dir_cost = _disagreement(hyp, observed.directed, observed.bidirected_matrix)
    return CostVector(0, bid_cost, dir_cost)


def level_base(hyp: WeightedHypothesis) -> int:
    """An integer exceeding any attainable directed or bidirected cost."""
    g = hyp.graph
    hd = g.directed
    max_d = int(hyp.presence_d[hd].sum() + hyp.absence_d[~hd].sum())
    upper = np.triu(np.ones((g.n, g.n), dtype=bool), 1)
    hb = np.triu(g.bidirected_matrix, 1)
    max_b = int(hyp.presence_b[hb].sum() + hyp.absence_b[upper & ~hb].sum())
    return max(max_d, max_b) + 1


def scalarize(c: CostVector, base: int) -> int:
    """Single integer ordering identically to the lexicographic comparison."""
    return (c.density_violation * base + c.bidirected_cost) * base + c.directed_cost


@dataclass(frozen=True)
class AdaptiveWeights:
    present: dict
    absent: int


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def adaptive_weights(strengths: Mapping[Hashable, float], w_max: int) -> AdaptiveWeights:
    """Quantise edge strengths linearly onto 1..w_max; absent edges get w_max.

    The strongest edge maps to ``w_max``. If every magnitude is zero all
    present edges get weight 1.
    """
    if w_max < 1:
        raise ValueError("w_max must be >= 1")
    mags = {k: abs(float(v)) for k, v in strengths.items()}
    if any(math.isnan(v) for v in mags.values()):
        raise ValueError("strengths must not be NaN")
    top = max(mags.values(), default=0.0)
    if top == 0:
        return AdaptiveWeights({k: 1 for k in mags}, w_max)
    present = {k: _round_half_up(1 + (w_max - 1) * v / top) for k, v in mags.items()}
    return AdaptiveWeights(present, w_max)


def weighted_from_strengths(
    graph: MixedGraph,
    directed_strength: np.ndarray,
    bidirected_strength: np.ndarray,
    w_max: int,
) -> WeightedHypothesis:
    """Hypothesis whose presence weights follow edge strengths (one joint scale)."""
    strengths = {}
    for i, j in graph.directed_edges():
        strengths[("d", i, j)] = directed_strength[i - 1, j - 1]
    for i, j in graph.bidirected_edges():
        strengths[("b", i, j)] = bidirected_strength[i - 1, j - 1]
    w = adaptive_weights(strengths, w_max)
    return WeightedHypothesis.from_weights(
        graph.n,
        {(i, j): w.present[("d", i, j)] for i, j in graph.directed_edges()},
        {(i, j): w.present[("b", i, j)] for i, j in graph.bidirected_edges()},
        absence_d=w.absent,
        absence_b=w.absent,
    )
