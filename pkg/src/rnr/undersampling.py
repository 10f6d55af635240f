"""Forward operator: the mixed graph seen when a causal graph is observed every u steps.

Directed edge i->j at rate u: a walk of exactly u steps from i to j.
Bidirected {i, j}: some node k reaches both i and j by walks of the same
length l, 1 <= l <= u-1.
"""
from __future__ import annotations

import numpy as np

from . import _kernels
from .graph_core import DirectedGraph, MixedGraph

DEFAULT_MAX_U = 20
ORACLE_MAX_N = 8
ORACLE_MAX_U = 6


def _bool_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a.astype(np.int64) @ b.astype(np.int64)) > 0


def undersample_matrices(adj: np.ndarray, u: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(directed, bidirected)`` boolean matrices for rate ``u``.

    ``bidirected`` is symmetric with an empty diagonal.
    """
    if u < 1:
        raise ValueError(f"rate must be >= 1, got {u}")
    adj = np.asarray(adj, dtype=bool)
    power = adj.copy()
    bid = np.zeros_like(adj)
    for _ in range(1, u):
        bid |= _bool_matmul(power.T, power)
        power = _bool_matmul(power, adj)
    np.fill_diagonal(bid, False)
    return power, bid


def _mixed_from_matrices(n: int, directed: np.ndarray, bid: np.ndarray) -> MixedGraph:
    ii, jj = np.nonzero(np.triu(bid, 1))
    pairs = frozenset((int(i) + 1, int(j) + 1) for i, j in zip(ii, jj))
    return MixedGraph(n, directed, pairs)


def undersample(g: DirectedGraph, u: int) -> MixedGraph:
    directed, bid = undersample_matrices(g.adj, u)
    return _mixed_from_matrices(g.n, directed, bid)


def undersample_bits(g: DirectedGraph, u: int) -> MixedGraph:
    """Same result as :func:`undersample`, via the bitmask kernel."""
    if u < 1:
        raise ValueError(f"rate must be >= 1, got {u}")
    rows = _kernels.rows_from_matrix(g.adj)
    out_d = np.zeros(g.n, dtype=np.int64)
    out_b = np.zeros(g.n, dtype=np.int64)
    _kernels.undersample_rows(rows, u, out_d, out_b)
    return _mixed_from_matrices(
        g.n,
        _kernels.matrix_from_rows(out_d, g.n),
        _kernels.matrix_from_rows(out_b, g.n),
    )


def undersample_oracle(g: DirectedGraph, u: int) -> MixedGraph:
    """Brute-force walk enumeration; independent check of :func:`undersample`.

    Every walk of length <= u is unrolled explicitly from every start node,
    so this is only usable at desk scale.
    """
    if u < 1:
        raise ValueError(f"rate must be >= 1, got {u}")
    if g.n > ORACLE_MAX_N or u > ORACLE_MAX_U:
        raise ValueError(
            f"oracle limited to n <= {ORACLE_MAX_N}, u <= {ORACLE_MAX_U} (got n={g.n}, u={u})"
        )
    n = g.n
    succ = {i: [j for j in range(n) if g.adj[i][j]] for i in range(n)}
    # ends[k][l] = set of nodes where some walk of length l from k terminates
    ends = {k: {l: set() for l in range(u + 1)} for k in range(n)}
    for k in range(n):
        walks = [[k]]
        while walks:
            walk = walks.pop()
            ends[k][len(walk) - 1].add(walk[-1])
            if len(walk) - 1 < u:
                for nxt in succ[walk[-1]]:
                    walks.append(walk + [nxt])
    directed = [(k + 1, j + 1) for k in range(n) for j in sorted(ends[k][u])]
    bidirected = set()
    for k in range(n):
        for l in range(1, u):
            reached = sorted(ends[k][l])
            for a in range(len(reached)):
                for b in range(a + 1, len(reached)):
                    bidirected.add((reached[a] + 1, reached[b] + 1))
    return MixedGraph.from_edges(n, directed, bidirected)
