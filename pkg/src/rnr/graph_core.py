"""Graph types, SCC decomposition and the line-oriented graph text format.

Nodes are 1-based in every external surface (text files, ASP atoms, CLI
output) and 0-based inside numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np


class GraphFormatError(ValueError):
    """Malformed graph text; ``lineno`` is 1-based."""

    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


def _frozen_bool(a, n: int) -> np.ndarray:
    arr = np.array(a, dtype=bool, copy=True)
    if arr.shape != (n, n):
        raise ValueError(f"adjacency must be {n}x{n}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    n: int
    adj: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        object.__setattr__(self, "adj", _frozen_bool(self.adj, self.n))

    @classmethod
    def empty(cls, n: int) -> "DirectedGraph":
        return cls(n, np.zeros((n, n), dtype=bool))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "DirectedGraph":
        """Build from 1-based ``(i, j)`` pairs."""
        adj = np.zeros((n, n), dtype=bool)
        for i, j in edges:
            adj[i - 1, j - 1] = True
        return cls(n, adj)

    def edges(self) -> list[tuple[int, int]]:
        """1-based edges in row-major order."""
        return [(int(i) + 1, int(j) + 1) for i, j in zip(*np.nonzero(self.adj))]

    @property
    def n_edges(self) -> int:
        return int(self.adj.sum())

    def key(self) -> bytes:
        return np.packbits(self.adj).tobytes()

    def __eq__(self, other):
        if not isinstance(other, DirectedGraph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.adj, other.adj)

    def __hash__(self):
        return hash((self.n, self.key()))

    def __repr__(self):
        return f"DirectedGraph(n={self.n}, edges={self.edges()})"


def _norm_pairs(pairs: Iterable[tuple[int, int]]) -> frozenset:
    out = set()
    for i, j in pairs:
        i, j = int(i), int(j)
        if i == j:
            raise ValueError(f"bidirected self-pair {{{i},{i}}}")
        out.add((min(i, j), max(i, j)))
    return frozenset(out)


@dataclass(frozen=True, eq=False)
class MixedGraph:
    """Directed adjacency plus unordered bidirected pairs ``(i, j)``, ``i < j``, 1-based."""

    n: int
    directed: np.ndarray
    bidirected: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        object.__setattr__(self, "directed", _frozen_bool(self.directed, self.n))
        pairs = _norm_pairs(self.bidirected)
        for i, j in pairs:
            if not (1 <= i <= self.n and 1 <= j <= self.n):
                raise ValueError(f"bidirected pair ({i},{j}) out of range")
        object.__setattr__(self, "bidirected", pairs)

    @classmethod
    def empty(cls, n: int) -> "MixedGraph":
        return cls(n, np.zeros((n, n), dtype=bool))

    @classmethod
    def from_edges(cls, n, directed=(), bidirected=()) -> "MixedGraph":
        adj = np.zeros((n, n), dtype=bool)
        for i, j in directed:
            adj[i - 1, j - 1] = True
        return cls(n, adj, frozenset(bidirected))

    @property
    def bidirected_matrix(self) -> np.ndarray:
        """Symmetric boolean matrix of the bidirected pairs."""
        m = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.bidirected:
            m[i - 1, j - 1] = m[j - 1, i - 1] = True
        return m

    def directed_edges(self) -> list[tuple[int, int]]:
        return [(int(i) + 1, int(j) + 1) for i, j in zip(*np.nonzero(self.directed))]

    def bidirected_edges(self) -> list[tuple[int, int]]:
        return sorted(self.bidirected)

    @property
    def n_edges(self) -> int:
        return int(self.directed.sum()) + len(self.bidirected)

    def issubgraph(self, other: "MixedGraph") -> bool:
        return (
            self.n == other.n
            and not np.any(self.directed & ~other.directed)
            and self.bidirected <= other.bidirected
        )

    def __eq__(self, other):
        if not isinstance(other, MixedGraph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.directed, other.directed)
            and self.bidirected == other.bidirected
        )

    def __hash__(self):
        return hash((self.n, np.packbits(self.directed).tobytes(), self.bidirected))

    def __repr__(self):
        return (
            f"MixedGraph(n={self.n}, directed={self.directed_edges()}, "
            f"bidirected={self.bidirected_edges()})"
        )


@dataclass(frozen=True, eq=False)
class WeightedHypothesis:
    """Observed graph with integer presence/absence weights.

    Weight matrices are n x n int64. ``presence_*`` is read only where the
    edge exists in ``graph``; ``absence_*`` only where it does not. The
    bidirected matrices are symmetric and only their upper triangle matters.
    """

    graph: MixedGraph
    presence_d: np.ndarray
    absence_d: np.ndarray
    presence_b: np.ndarray
    absence_b: np.ndarray

    def __post_init__(self):
        n = self.graph.n
        for name in ("presence_d", "absence_d", "presence_b", "absence_b"):
            arr = np.array(getattr(self, name), dtype=np.int64, copy=True)
            if arr.shape != (n, n):
                raise ValueError(f"{name} must be {n}x{n}")
            if name.endswith("_b"):
                arr = np.triu(arr, 1)
                arr = arr + arr.T
                np.fill_diagonal(arr, 1)
            if np.any(arr < 1):
                raise ValueError(f"{name}: weights must be positive integers")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def uniform(
        cls,
        graph: MixedGraph,
        presence: int = 1,
        absence_d: int = 1,
        absence_b: int = 1,
    ) -> "WeightedHypothesis":
        n = graph.n
        full = lambda w: np.full((n, n), int(w), dtype=np.int64)  # noqa: E731
        return cls(graph, full(presence), full(absence_d), full(presence), full(absence_b))

    @classmethod
    def from_weights(
        cls,
        n: int,
        directed: dict,
        bidirected: dict,
        absence_d: int = 1,
        absence_b: int = 1,
    ) -> "WeightedHypothesis":
        """``directed``/``bidirected`` map 1-based pairs to presence weights."""
        pd = np.ones((n, n), dtype=np.int64)
        pb = np.ones((n, n), dtype=np.int64)
        for (i, j), w in directed.items():
            pd[i - 1, j - 1] = w
        for (i, j), w in bidirected.items():
            pb[i - 1, j - 1] = pb[j - 1, i - 1] = w
        g = MixedGraph.from_edges(n, directed.keys(), bidirected.keys())
        return cls(
            g,
            pd,
            np.full((n, n), absence_d, dtype=np.int64),
            pb,
            np.full((n, n), absence_b, dtype=np.int64),
        )

    @property
    def n(self) -> int:
        return self.graph.n

    def directed_weights(self) -> dict:
        return {e: int(self.presence_d[e[0] - 1, e[1] - 1]) for e in self.graph.directed_edges()}

    def bidirected_weights(self) -> dict:
        return {e: int(self.presence_b[e[0] - 1, e[1] - 1]) for e in self.graph.bidirected_edges()}

    def global_absence(self) -> tuple[int, int] | None:
        """``(wa_d, wa_b)`` when absence weights are uniform over non-edges, else None."""
        g = self.graph
        md = ~g.directed
        mb = ~g.bidirected_matrix & ~np.eye(g.n, dtype=bool)
        vals_d = np.unique(self.absence_d[md]) if md.any() else np.array([1])
        vals_b = np.unique(self.absence_b[mb]) if mb.any() else np.array([1])
        if len(vals_d) != 1 or len(vals_b) != 1:
            return None
        return int(vals_d[0]), int(vals_b[0])

    def _cmp_tuple(self):
        mask_d = self.graph.directed
        mask_b = np.triu(self.graph.bidirected_matrix, 1)
        no_d = ~mask_d
        no_b = np.triu(~self.graph.bidirected_matrix, 1)
        return (
            self.graph,
            tuple(self.presence_d[mask_d]),
            tuple(self.absence_d[no_d]),
            tuple(self.presence_b[mask_b]),
            tuple(self.absence_b[no_b]),
        )

    def __eq__(self, other):
        if not isinstance(other, WeightedHypothesis):
            return NotImplemented
        return self._cmp_tuple() == other._cmp_tuple()

    def __hash__(self):
        return hash(self._cmp_tuple())


def as_hypothesis(obj) -> WeightedHypothesis:
    """Coerce a parsed graph or MixedGraph to a hypothesis with default weights."""
    if isinstance(obj, WeightedHypothesis):
        return obj
    if isinstance(obj, DirectedGraph):
        obj = MixedGraph(obj.n, obj.adj)
    if isinstance(obj, MixedGraph):
        return WeightedHypothesis.uniform(obj)
    raise TypeError(f"cannot make a hypothesis from {type(obj).__name__}")


# --------------------------------------------------------------------------
# SCCs

@dataclass(frozen=True)
class SccInfo:
    """Component ids are 1-based and follow a topological order of the condensation."""

    assignment: tuple  # assignment[node - 1] = component id
    sizes: dict
    condensation: frozenset  # (K, L) component pairs

    @property
    def n_components(self) -> int:
        return len(self.sizes)

    def members(self, k: int) -> list[int]:
        return [v + 1 for v, c in enumerate(self.assignment) if c == k]

    def allowed_mask(self) -> np.ndarray:
        """Edges permitted by the SCC/DAG integrity constraint (n x n bool).

        An edge i->j with scc(i)=K != L=scc(j) and |L| > 1 is allowed only
        when K->L is a condensation edge.
        """
        comp = np.asarray(self.assignment)
        n = len(comp)
        mask = np.ones((n, n), dtype=bool)
        for i in range(n):
            for j in range(n):
                k, l = comp[i], comp[j]
                if k != l and self.sizes[l] > 1 and (k, l) not in self.condensation:
                    mask[i, j] = False
        return mask


def scc_decompose(g: DirectedGraph) -> SccInfo:
    """Iterative Tarjan; components numbered in topological order."""
    n = g.n
    succ = [list(np.nonzero(g.adj[v])[0]) for v in range(n)]
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] >= 0:
            continue
        work = [(root, 0)]
        while work:
            v, pos = work.pop()
            if pos == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            recurse = False
            for p in range(pos, len(succ[v])):
                w = succ[v][p]
                if index[w] < 0:
                    work.append((v, p + 1))
                    work.append((w, 0))
                    recurse = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if recurse:
                continue
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
    # Tarjan emits sinks first
    comps.reverse()
    assignment = [0] * n
    for cid, comp in enumerate(comps, start=1):
        for v in comp:
            assignment[v] = cid
    cond = set()
    for i, j in zip(*np.nonzero(g.adj)):
        k, l = assignment[i], assignment[j]
        if k != l:
            cond.add((k, l))
    sizes = {cid: len(c) for cid, c in enumerate(comps, start=1)}
    return SccInfo(tuple(assignment), sizes, frozenset(cond))


# --------------------------------------------------------------------------
# text format

Graph = Union[DirectedGraph, MixedGraph, WeightedHypothesis]


def _parse_int(tok: str, lineno: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise GraphFormatError(lineno, f"bad {what} {tok!r}") from None


def parse_graph(text: str | bytes) -> DirectedGraph | WeightedHypothesis:
    """Parse the graph text format.

    Returns a :class:`DirectedGraph` when the text holds only unweighted
    ``d`` lines, otherwise a :class:`WeightedHypothesis` with presence and
    absence weights defaulting to 1.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    n = None
    directed: dict = {}
    bidirected: dict = {}
    wa: dict = {}
    weighted = False
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        toks = line.split()
        head = toks[0]
        if n is None:
            if head != "nodes" or len(toks) != 2:
                raise GraphFormatError(lineno, "expected 'nodes <n>' header")
            n = _parse_int(toks[1], lineno, "node count")
            if n < 1:
                raise GraphFormatError(lineno, "node count must be >= 1")
            continue
        if head in ("d", "b"):
            if len(toks) not in (3, 4):
                raise GraphFormatError(lineno, f"expected '{head} <i> <j> [w]'")
            i = _parse_int(toks[1], lineno, "node")
            j = _parse_int(toks[2], lineno, "node")
            for v in (i, j):
                if not 1 <= v <= n:
                    raise GraphFormatError(lineno, f"node {v} out of range [1..{n}]")
            w = 1
            if len(toks) == 4:
                w = _parse_int(toks[3], lineno, "weight")
                if w < 1:
                    raise GraphFormatError(lineno, "weight must be a positive integer")
                weighted = True
            if head == "d":
                if (i, j) in directed:
                    raise GraphFormatError(lineno, f"duplicate edge d {i} {j}")
                directed[(i, j)] = w
            else:
                if i == j:
                    raise GraphFormatError(lineno, "bidirected edge needs two distinct nodes")
                key = (min(i, j), max(i, j))
                if key in bidirected:
                    raise GraphFormatError(lineno, f"duplicate edge b {key[0]} {key[1]}")
                bidirected[key] = w
        elif head in ("wa-d", "wa-b"):
            if len(toks) != 2:
                raise GraphFormatError(lineno, f"expected '{head} <w>'")
            if head in wa:
                raise GraphFormatError(lineno, f"duplicate {head} line")
            w = _parse_int(toks[1], lineno, "weight")
            if w < 1:
                raise GraphFormatError(lineno, "weight must be a positive integer")
            wa[head] = w
        elif head == "nodes":
            raise GraphFormatError(lineno, "duplicate 'nodes' header")
        else:
            raise GraphFormatError(lineno, f"unknown record {head!r}")
    if n is None:
        raise GraphFormatError(1, "missing 'nodes <n>' header")
    if not bidirected and not weighted and not wa:
        return DirectedGraph.from_edges(n, directed)
    return WeightedHypothesis.from_weights(
        n, directed, bidirected, wa.get("wa-d", 1), wa.get("wa-b", 1)
    )


def write_graph(g: Graph) -> str:
    """Canonical text: header, row-major ``d`` lines, then sorted ``b`` lines.

    Hypotheses always carry explicit weights and both ``wa-*`` lines so that
    they parse back as hypotheses.
    """
    lines = [f"nodes {g.n}"]
    if isinstance(g, DirectedGraph):
        lines += [f"d {i} {j}" for i, j in g.edges()]
    elif isinstance(g, MixedGraph):
        lines += [f"d {i} {j}" for i, j in g.directed_edges()]
        lines += [f"b {i} {j}" for i, j in g.bidirected_edges()]
    elif isinstance(g, WeightedHypothesis):
        absence = g.global_absence()
        if absence is None:
            raise ValueError("per-edge absence weights cannot be written in the text format")
        lines += [f"d {i} {j} {w}" for (i, j), w in g.directed_weights().items()]
        lines += [f"b {i} {j} {w}" for (i, j), w in g.bidirected_weights().items()]
        lines += [f"wa-d {absence[0]}", f"wa-b {absence[1]}"]
    else:
        raise TypeError(f"cannot write {type(g).__name__}")
    return "\n".join(lines) + "\n"
