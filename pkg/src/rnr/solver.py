"""Exact inverse search over (causal graph, undersampling rate) pairs.

The native search is branch-and-bound over the n^2 edge variables at each
rate (see :func:`rnr._kernels.branch_and_bound`). It runs in two phases:
find the optimal cost over all rates, then enumerate every model whose
cost does not exceed it. Both phases are deterministic, so the solution set
does not depend on the worker count.
"""
from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import _kernels
from .graph_core import DirectedGraph, SccInfo, WeightedHypothesis, as_hypothesis
from .objective import FLAT, LEX, CostVector, DensityBand, cost, level_base
from .undersampling import DEFAULT_MAX_U, undersample_matrices

log = logging.getLogger(__name__)

UNBOUNDED = 2**62
BRUTEFORCE_MAX_N = 4
BRUTEFORCE_MAX_U = 4


class InfeasibleError(RuntimeError):
    """No candidate graph satisfies the hard constraints."""


@dataclass(frozen=True)
class OptMode:
    """``opt``, ``optN`` (optional cost bound) or ``enum`` (required bound).

    Bounds apply to the summed cost of a model. ``cap`` limits how many
    models are returned; 0 means no limit.
    """

    kind: str = "optN"
    bound: Optional[int] = None
    cap: int = 0

    def __post_init__(self):
        if self.kind not in ("opt", "optN", "enum"):
            raise ValueError(f"unknown opt mode {self.kind!r}")
        if self.kind == "enum" and self.bound is None:
            raise ValueError("enum mode requires a cost bound")
        if self.kind == "opt" and self.bound is not None:
            raise ValueError("opt mode takes no bound")
        if self.cap < 0:
            raise ValueError("cap must be >= 0")
        if self.bound is not None and self.bound < 0:
            raise ValueError("bound must be >= 0")

    @classmethod
    def parse(cls, text: str, cap: int = 0) -> "OptMode":
        """Parse ``opt``, ``optN``, ``optN,<b>`` or ``enum,<b>``."""
        kind, _, rest = text.partition(",")
        bound = int(rest) if rest else None
        return cls(kind, bound, cap)

    def __str__(self):
        return self.kind if self.bound is None else f"{self.kind},{self.bound}"


@dataclass(frozen=True)
class SolverConfig:
    max_u: int = DEFAULT_MAX_U
    mode: OptMode = field(default_factory=OptMode)
    band: Optional[DensityBand] = None
    priority: str = LEX
    scc_constraint: Optional[SccInfo] = None
    workers: int = 1
    strict_density: bool = False

    def __post_init__(self):
        if self.max_u < 1:
            raise ValueError("max_u must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.priority not in (LEX, FLAT):
            raise ValueError(f"priority must be '{LEX}' or '{FLAT}'")


class Solution(NamedTuple):
    graph: DirectedGraph
    u: int
    cost: CostVector


def _sort_key(sol: Solution, priority: str):
    return (sol.cost.key(priority), sol.cost.as_tuple(), sol.u, sol.graph.key())


def _graph_order_keys(rows: np.ndarray, n: int) -> list:
    """Per-row sort keys matching :meth:`DirectedGraph.key` byte order.

    ``DirectedGraph.key`` packs the matrix row-major with the first slot as
    the most significant bit, so each bitmask row is bit-reversed over its
    n bits; the rows then compare lexicographically in node order.
    """
    keys = []
    for i in range(n):
        col = rows[:, i]
        rev = np.zeros(len(rows), dtype=np.int64)
        for j in range(n):
            rev |= ((col >> j) & 1) << (n - 1 - j)
        keys.append(rev)
    return keys


class SolutionSet:
    """Models in canonical order: cost under the priority, then rate, then graph.

    Graphs are held as bitmask rows (``rows[k, i]`` bit ``j`` is edge
    i+1 -> j+1) next to ``rates`` and ``costs`` arrays; :class:`Solution`
    objects are built on access, so classes with millions of members stay
    compact.
    """

    def __init__(self, n: int, rows, rates, costs, optimum: Optional[CostVector], complete: bool):
        self.n = int(n)
        self.rows = np.asarray(rows, dtype=np.int64).reshape(-1, self.n)
        self.rates = np.asarray(rates, dtype=np.int64).reshape(-1)
        self.costs = np.asarray(costs, dtype=np.int64).reshape(-1, 3)
        self.optimum = optimum
        self.complete = bool(complete)
        self._objects = None

    @classmethod
    def empty(cls, n: int = 0, complete: bool = True) -> "SolutionSet":
        return cls(n, np.zeros((0, n)), np.zeros(0), np.zeros((0, 3)), None, complete)

    @classmethod
    def canonical(cls, n, rows, rates, costs, complete, priority, optimum=None) -> "SolutionSet":
        """Sort the arrays into canonical order; the optimum defaults to the first cost."""
        rows = np.asarray(rows, dtype=np.int64).reshape(-1, n)
        rates = np.asarray(rates, dtype=np.int64).reshape(-1)
        costs = np.asarray(costs, dtype=np.int64).reshape(-1, 3)
        primary = costs.sum(axis=1) if priority == FLAT else costs[:, 0]
        # np.lexsort treats its last key as the primary one
        keys = _graph_order_keys(rows, n)[::-1] + [rates, costs[:, 2], costs[:, 1], costs[:, 0], primary]
        order = np.lexsort(keys) if len(rates) else np.zeros(0, dtype=np.int64)
        rows, rates, costs = rows[order], rates[order], costs[order]
        if optimum is None and len(rates):
            optimum = CostVector(*(int(c) for c in costs[0]))
        return cls(n, rows, rates, costs, optimum, complete)

    def __len__(self):
        return len(self.rates)

    def __getitem__(self, k: int) -> Solution:
        if self._objects is not None:
            return self._objects[k]
        c = self.costs[k]
        graph = DirectedGraph(self.n, _kernels.matrix_from_rows(self.rows[k], self.n))
        return Solution(graph, int(self.rates[k]), CostVector(int(c[0]), int(c[1]), int(c[2])))

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]

    @property
    def solutions(self) -> tuple:
        if self._objects is None:
            self._objects = tuple(self[k] for k in range(len(self)))
        return self._objects

    def pairs(self) -> set:
        return {(s.graph, s.u) for s in self}

    def triples(self) -> set:
        return {(s.graph, s.u, s.cost) for s in self}

    def __contains__(self, item):
        graph, u = item
        if graph.n != self.n or not len(self):
            return False
        target = _kernels.rows_from_matrix(graph.adj)
        hit = (self.rates == u) & np.all(self.rows == target[None, :], axis=1)
        return bool(hit.any())

    def images_match(self, observed) -> np.ndarray:
        """Per member: does undersampling it at its rate give ``observed`` exactly?"""
        hd = _kernels.rows_from_matrix(observed.directed)
        hb = _kernels.rows_from_matrix(observed.bidirected_matrix)
        return _kernels.images_match(self.rows, self.rates, hd, hb)

    def digest(self) -> str:
        """SHA-256 over the canonical content."""
        h = hashlib.sha256()
        h.update(f"{self.n}|{self.optimum}|{int(self.complete)}|{len(self)}|".encode())
        for arr in (self.rows, self.rates, self.costs):
            h.update(np.ascontiguousarray(arr, dtype="<i8").tobytes())
        return h.hexdigest()

    def __eq__(self, other):
        if not isinstance(other, SolutionSet):
            return NotImplemented
        return (
            self.n == other.n
            and self.optimum == other.optimum
            and self.complete == other.complete
            and np.array_equal(self.rates, other.rates)
            and np.array_equal(self.costs, other.costs)
            and np.array_equal(self.rows, other.rows)
        )

    __hash__ = None

    def __repr__(self):
        return f"SolutionSet(n={self.n}, size={len(self)}, optimum={self.optimum}, complete={self.complete})"


def _canonical(solutions, optimum, complete, priority, n: int = 0) -> SolutionSet:
    """Canonical set from :class:`Solution` objects."""
    sols = list(solutions)
    if sols:
        n = sols[0].graph.n
    rows = np.array([_kernels.rows_from_matrix(s.graph.adj) for s in sols], dtype=np.int64).reshape(-1, n)
    rates = np.array([s.u for s in sols], dtype=np.int64)
    costs = np.array([s.cost.as_tuple() for s in sols], dtype=np.int64).reshape(-1, 3)
    return SolutionSet.canonical(n, rows, rates, costs, complete, priority, optimum)


# --------------------------------------------------------------------------
# native search

def _variable_order(hyp: WeightedHypothesis) -> np.ndarray:
    """Static edge ordering, most constraining first, ties row-major.

    Edge a->b scores the observed directed edges leaving a and entering b
    plus the observed bidirected edges touching b: those are the
    hypothesis edges whose walks most directly start or end with it.
    """
    g = hyp.graph
    n = g.n
    out_deg = g.directed.sum(axis=1)
    in_deg = g.directed.sum(axis=0)
    bid_deg = g.bidirected_matrix.sum(axis=0)
    scores = out_deg[:, None] + in_deg[None, :] + bid_deg[None, :]
    flat = scores.ravel()
    idx = np.arange(n * n)
    # stable sort on descending score keeps row-major among ties
    return idx[np.argsort(-flat, kind="stable")].astype(np.int64)


class _Problem:
    """Hypothesis and config flattened to kernel arguments."""

    def __init__(self, hyp: WeightedHypothesis, cfg: SolverConfig):
        n = hyp.n
        if n > _kernels.MAX_BITS:
            raise ValueError(f"native solver supports at most {_kernels.MAX_BITS} nodes")
        band = cfg.band or DensityBand.inactive(n)
        band.check(n)
        self.n = n
        self.priority = cfg.priority
        self.hd = _kernels.rows_from_matrix(hyp.graph.directed)
        self.hb = _kernels.rows_from_matrix(hyp.graph.bidirected_matrix)
        self.wpd = np.ascontiguousarray(hyp.presence_d, dtype=np.int64)
        self.wad = np.ascontiguousarray(hyp.absence_d, dtype=np.int64)
        self.wpb = np.ascontiguousarray(hyp.presence_b, dtype=np.int64)
        self.wab = np.ascontiguousarray(hyp.absence_b, dtype=np.int64)
        allowed = np.ones((n, n), dtype=bool)
        if cfg.scc_constraint is not None:
            if len(cfg.scc_constraint.assignment) != n:
                raise ValueError("SCC constraint node count does not match the hypothesis")
            allowed = cfg.scc_constraint.allowed_mask()
        self.allowed = _kernels.rows_from_matrix(allowed)
        self.order = _variable_order(hyp)
        self.dmin = band.d_min
        self.dmax = band.d_max
        self.strict = bool(cfg.strict_density)
        self.lex = cfg.priority == LEX
        self.base = level_base(hyp)

    def key(self, c: CostVector) -> int:
        return int(_kernels.scalar_key(*c.as_tuple(), self.lex, self.base))

    def run(self, u, key_limit, total_limit, collect, max_solutions):
        return _kernels.branch_and_bound(
            u, self.hd, self.hb, self.wpd, self.wad, self.wpb, self.wab,
            self.allowed, self.order, self.dmin, self.dmax, self.strict,
            self.lex, self.base, key_limit, total_limit, collect, max_solutions,
        )

    def no_models(self):
        return np.zeros((0, self.n), dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros((0, 3), dtype=np.int64)


def _map(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _find_optimum(prob: _Problem, cfg: SolverConfig, total_limit: int, proven: dict):
    """Lowest key over all rates, or None.

    Deepens the key limit 0, 1, 3, 7, ...: a search under a tight limit
    prunes far harder than one that starts unbounded and has to prove
    optimality of a loose incumbent.

    ``proven[u]`` collects the largest key limit under which rate ``u`` was
    searched to exhaustion without a model; rates already proven at the
    current limit are skipped.
    """
    n = prob.n
    ceiling = prob.key(CostVector(n * n, prob.base - 1, prob.base - 1))
    limit = 0
    while True:
        shared = np.array([limit], dtype=np.int64)

        def one(u):
            if shared[0] <= proven.get(u, -1):
                return -1
            best, count, rows, costs, nodes = prob.run(u, shared, total_limit, False, 0)
            log.debug("optimise u=%d limit=%d: best=%d nodes=%d", u, limit, best, nodes)
            if best < 0:
                # the shared limit only ever drops, so its final value is safe
                proven[u] = max(proven.get(u, -1), int(shared[0]))
            return int(best)

        bests = [b for b in _map(one, list(range(1, cfg.max_u + 1)), cfg.workers) if b >= 0]
        if bests:
            return min(bests)
        if limit >= ceiling:
            return None
        limit = min(2 * limit + 1, ceiling)


def _enumerate(prob: _Problem, cfg: SolverConfig, key_limit: int, total_limit: int, cap: int,
               proven: dict | None = None):
    """Models within the limits as ``(rows, rates, costs)`` arrays, rates in
    search order; truncated to ``cap``. Also returns whether nothing was cut."""
    per_rate = cap + 1 if cap > 0 else 0
    proven = proven or {}

    def one(u):
        if key_limit <= proven.get(u, -1):
            return prob.no_models()
        lim = np.array([key_limit], dtype=np.int64)
        best, count, rows, costs, nodes = prob.run(u, lim, total_limit, True, per_rate)
        log.debug("enumerate u=%d: found=%d nodes=%d", u, count, nodes)
        return rows, np.full(len(rows), u, dtype=np.int64), costs

    parts = _map(one, list(range(1, cfg.max_u + 1)), cfg.workers)
    rows = np.concatenate([p[0] for p in parts])
    rates = np.concatenate([p[1] for p in parts])
    costs = np.concatenate([p[2] for p in parts])
    if cap > 0 and len(rates) > cap:
        return (rows[:cap], rates[:cap], costs[:cap]), False
    return (rows, rates, costs), True


def solve(hyp, cfg: SolverConfig | None = None) -> SolutionSet:
    """Find (graph, rate) models for ``hyp`` according to ``cfg.mode``.

    * ``opt``: one optimal model (the first found, rates ascending).
    * ``optN``: every optimal model; with a bound, only if the optimum's
      summed cost is within it.
    * ``enum``: every model whose summed cost is within the bound.

    ``complete`` is False when ``cap`` cut the enumeration short.
    """
    hyp = as_hypothesis(hyp)
    cfg = cfg or SolverConfig()
    prob = _Problem(hyp, cfg)
    mode = cfg.mode

    if mode.kind == "enum":
        found, complete = _enumerate(prob, cfg, UNBOUNDED, mode.bound, mode.cap)
        return SolutionSet.canonical(prob.n, *found, complete, cfg.priority)

    total_limit = mode.bound if mode.bound is not None else UNBOUNDED
    proven: dict = {}
    best = _find_optimum(prob, cfg, total_limit, proven)
    if best is None:
        if cfg.strict_density and mode.bound is None:
            raise InfeasibleError("no graph satisfies the strict density band")
        return SolutionSet.empty(prob.n)

    if mode.kind == "opt":
        first = None
        more = False
        for u in range(1, cfg.max_u + 1):
            if best <= proven.get(u, -1):
                continue
            lim = np.array([best], dtype=np.int64)
            _, count, rows, costs, _ = prob.run(u, lim, total_limit, True, 1 if first else 2)
            if first is None and len(rows):
                first = (rows[:1], np.array([u]), costs[:1])
                rows = rows[1:]
            if len(rows):
                more = True
                break
        return SolutionSet.canonical(prob.n, *first, not more, cfg.priority)

    found, complete = _enumerate(prob, cfg, best, total_limit, mode.cap, proven)
    return SolutionSet.canonical(prob.n, *found, complete, cfg.priority)


# --------------------------------------------------------------------------
# admissible bound (numpy route, used for checking and by callers)

IN, OUT, UNDECIDED = 1, 0, -1


def lower_bound(
    partial: np.ndarray,
    u: int,
    hyp: WeightedHypothesis,
    band: DensityBand | None = None,
) -> CostVector:
    """Cost no completion of ``partial`` can beat at rate ``u``.

    ``partial`` is an n x n integer matrix of IN (1), OUT (0) or
    UNDECIDED (-1). Undersampling is monotone in the edge set, so every
    completion's undersampled graph lies between U(in) and U(in | undecided).
    """
    hyp = as_hypothesis(hyp)
    partial = np.asarray(partial)
    n = hyp.n
    if partial.shape != (n, n):
        raise ValueError(f"partial assignment must be {n}x{n}")
    low = partial == IN
    high = low | (partial == UNDECIDED)
    low_d, low_b = undersample_matrices(low, u)
    high_d, high_b = undersample_matrices(high, u)
    g = hyp.graph
    hd = g.directed
    hb = np.triu(g.bidirected_matrix, 1)
    low_b = np.triu(low_b, 1)
    high_b = np.triu(high_b, 1)
    dir_lb = int(hyp.presence_d[hd & ~high_d].sum() + hyp.absence_d[~hd & low_d].sum())
    bid_lb = int(hyp.presence_b[hb & ~high_b].sum() + hyp.absence_b[~hb & low_b].sum())
    dens = 0
    if band is not None:
        lo, hi = int(low.sum()), int(high.sum())
        if lo > band.d_max:
            dens = lo - band.d_max
        elif hi < band.d_min:
            dens = band.d_min - hi
    return CostVector(dens, bid_lb, dir_lb)


# --------------------------------------------------------------------------
# exhaustive oracle

def solve_bruteforce(hyp, cfg: SolverConfig | None = None) -> SolutionSet:
    """Score every (graph, rate) pair with :func:`rnr.objective.cost` and filter by mode.

    Truncation by ``cap`` keeps the canonically first models, so only
    uncapped results are comparable with :func:`solve` member for member.
    """
    hyp = as_hypothesis(hyp)
    cfg = cfg or SolverConfig()
    n = hyp.n
    if n > BRUTEFORCE_MAX_N or cfg.max_u > BRUTEFORCE_MAX_U:
        raise ValueError(
            f"brute force limited to n <= {BRUTEFORCE_MAX_N}, max_u <= {BRUTEFORCE_MAX_U}"
        )
    band = cfg.band or DensityBand.inactive(n)
    allowed = cfg.scc_constraint.allowed_mask() if cfg.scc_constraint is not None else None
    mode = cfg.mode
    scored = []
    for code in range(2 ** (n * n)):
        bits = np.array([(code >> k) & 1 for k in range(n * n)], dtype=bool).reshape(n, n)
        if allowed is not None and np.any(bits & ~allowed):
            continue
        g = DirectedGraph(n, bits)
        if cfg.strict_density and band.violation(g.n_edges) > 0:
            continue
        for u in range(1, cfg.max_u + 1):
            scored.append(Solution(g, u, cost(g, u, hyp, band)))

    if mode.bound is not None:
        scored = [s for s in scored if s.cost.total <= mode.bound]
    elif not scored and cfg.strict_density:
        raise InfeasibleError("no graph satisfies the strict density band")
    if mode.kind != "enum" and scored:
        best = min(s.cost.key(cfg.priority) for s in scored)
        scored = [s for s in scored if s.cost.key(cfg.priority) == best]
    scored.sort(key=lambda s: _sort_key(s, cfg.priority))
    if not scored:
        return SolutionSet.empty(n)
    limit = 1 if mode.kind == "opt" else mode.cap
    complete = not (limit and len(scored) > limit)
    kept = scored[:limit] if limit else scored
    return _canonical(kept, kept[0].cost, complete, cfg.priority)
