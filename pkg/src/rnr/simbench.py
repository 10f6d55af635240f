"""Simulation harness: random graphs, edge breaking, VAR pipeline, error reports."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .graph_core import DirectedGraph, MixedGraph, WeightedHypothesis
from .objective import CostVector, cost, weighted_from_strengths
from .solver import SolverConfig, solve
from .undersampling import undersample

BURN_IN = 200
COEF_RANGE = (0.1, 0.9)
RHO_CAP = 0.95
THRESHOLD_D = 0.1
THRESHOLD_B = 0.2


class TrialSkipped(Exception):
    pass


@dataclass(frozen=True)
class ErrorReport:
    omission_d: float
    commission_d: float
    omission_b: float
    commission_b: float
    f1: float

    @property
    def total(self) -> float:
        return self.omission_d + self.commission_d + self.omission_b + self.commission_b


def _rates(missing: int, truth_count: int, spurious: int, slots: int) -> tuple[float, float]:
    om = missing / truth_count if truth_count else 0.0
    free = slots - truth_count
    com = spurious / free if free else 0.0
    return om, com


def error_report(estimate: MixedGraph, truth: MixedGraph) -> ErrorReport:
    """Omission over true edges, commission over the slots free of true edges.

    Directed slots number n^2 (self-loops count), bidirected slots n(n-1)/2.
    F1 is over directed edges; it is 1 when both graphs have none.
    """
    if estimate.n != truth.n:
        raise ValueError("graphs differ in node count")
    n = truth.n
    ed, td = estimate.directed, truth.directed
    tp = int((ed & td).sum())
    n_true, n_est = int(td.sum()), int(ed.sum())
    om_d, com_d = _rates(n_true - tp, n_true, n_est - tp, n * n)
    eb, tb = estimate.bidirected, truth.bidirected
    om_b, com_b = _rates(len(tb - eb), len(tb), len(eb - tb), n * (n - 1) // 2)
    if n_true == 0 and n_est == 0:
        f1 = 1.0
    elif tp == 0:
        f1 = 0.0
    else:
        precision, recall = tp / n_est, tp / n_true
        f1 = 2 * precision * recall / (precision + recall)
    return ErrorReport(om_d, com_d, om_b, com_b, f1)


def as_mixed(g: DirectedGraph) -> MixedGraph:
    return MixedGraph(g.n, g.adj)


def random_graph(n: int, density: float, seed) -> DirectedGraph:
    """Each of the n^2 slots (self-loops included) independently with probability ``density``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    return DirectedGraph(n, rng.random((n, n)) < density)


# --------------------------------------------------------------------------
# edge breaking

@dataclass(frozen=True)
class EdgeBreakResult:
    seed: int
    u: int
    deleted: tuple  # ("d" | "b", i, j)
    deleted_weight: int
    optimum: CostVector
    truth_cost: CostVector  # cost of the generating (G, u) against the broken graph
    priority: str
    class_size: int
    complete: bool
    best: ErrorReport  # class member closest to the truth at rate 1
    blind: ErrorReport  # first member in cost order, chosen without the truth
    naive: ErrorReport  # observed directed part taken as the causal graph

    def within_truth_cost(self) -> bool:
        """The optimum is never worse than what the generating graph scores."""
        return self.optimum.key(self.priority) <= self.truth_cost.key(self.priority)


def _observed_edges(h: MixedGraph) -> list[tuple]:
    return [("d", i, j) for i, j in h.directed_edges()] + [
        ("b", i, j) for i, j in h.bidirected_edges()
    ]


def _delete(h: MixedGraph, edge: tuple) -> MixedGraph:
    kind, i, j = edge
    if kind == "d":
        d = h.directed.copy()
        d[i - 1, j - 1] = False
        return MixedGraph(h.n, d, h.bidirected)
    return MixedGraph(h.n, h.directed, h.bidirected - {(i, j)})


def edge_break_trial(
    n: int,
    density: float,
    u: int,
    seed: int,
    cfg: SolverConfig | None = None,
) -> EdgeBreakResult:
    """Undersample a random graph, drop one observed edge, and re-solve.

    Raises :class:`TrialSkipped` when the undersampled graph has no edges.
    """
    rng = np.random.default_rng(seed)
    g = DirectedGraph(n, rng.random((n, n)) < density)
    h0 = undersample(g, u)
    edges = _observed_edges(h0)
    if not edges:
        raise TrialSkipped(f"seed {seed}: undersampled graph is empty")
    edge = edges[int(rng.integers(len(edges)))]
    hyp = WeightedHypothesis.uniform(_delete(h0, edge))
    kind, i, j = edge
    weights = hyp.presence_d if kind == "d" else hyp.presence_b
    cfg = cfg or SolverConfig(max_u=max(u, 3))
    sols = solve(hyp, cfg)
    truth = as_mixed(g)
    truth_cost = cost(g, u, hyp, cfg.band)
    reports = [error_report(as_mixed(s.graph), truth) for s in sols.solutions]
    best = min(reports, key=lambda r: r.omission_d + r.commission_d)
    naive = error_report(MixedGraph(n, hyp.graph.directed), truth)
    return EdgeBreakResult(
        seed=seed,
        u=u,
        deleted=edge,
        deleted_weight=int(weights[i - 1, j - 1]),
        optimum=sols.optimum,
        truth_cost=truth_cost,
        priority=cfg.priority,
        class_size=len(sols),
        complete=sols.complete,
        best=best,
        blind=reports[0],
        naive=naive,
    )


def run_edgebreak(
    n: int,
    density: float,
    rates,
    trials: int,
    seed: int,
    cfg: SolverConfig | None = None,
    workers: int = 1,
):
    """Run ``trials`` completed trials on seeds ``seed, seed+1, ...``.

    Seed ``seed + k`` uses rate ``rates[k % len(rates)]``. Seeds whose
    undersampled graph is empty are skipped and further seeds drawn.
    Returns ``(results, skipped_seeds)``, results ordered by seed.
    """
    rates = list(rates)

    def one(s):
        u = rates[(s - seed) % len(rates)]
        try:
            return edge_break_trial(n, density, u, s, cfg)
        except TrialSkipped:
            return s

    results, skipped = [], []
    nxt = seed
    while len(results) < trials:
        batch = list(range(nxt, nxt + trials - len(results)))
        nxt += len(batch)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                outs = list(pool.map(one, batch))
        else:
            outs = [one(s) for s in batch]
        results += [o for o in outs if isinstance(o, EdgeBreakResult)]
        skipped += [o for o in outs if not isinstance(o, EdgeBreakResult)]
    return sorted(results, key=lambda r: r.seed), sorted(skipped)


# --------------------------------------------------------------------------
# VAR pipeline

@dataclass(frozen=True)
class VarSystem:
    """x_t = coefficients @ x_{t-1} + noise; edge i->j of the graph sits at coefficients[j, i]."""

    coefficients: np.ndarray
    noise_std: float
    length: int

    @property
    def spectral_radius(self) -> float:
        if self.coefficients.size == 0:
            return 0.0
        return float(np.max(np.abs(np.linalg.eigvals(self.coefficients))))

    def simulate(self, rng: np.random.Generator) -> np.ndarray:
        """n x length series after discarding the burn-in; starts from zero."""
        n = self.coefficients.shape[0]
        steps = self.length + BURN_IN
        if self.noise_std > 0:
            noise = rng.normal(0.0, self.noise_std, size=(n, steps))
        else:
            noise = np.zeros((n, steps))
        out = np.empty((n, steps))
        _kernels.var_recursion(np.ascontiguousarray(self.coefficients, dtype=np.float64), noise, out)
        return out[:, BURN_IN:]


def random_var_system(g: DirectedGraph, noise_std: float, length: int, rng) -> VarSystem:
    """Coefficients on the graph's support, |c| ~ U[0.1, 0.9] with random sign.

    Rescaled by 0.95 / rho whenever the spectral radius rho reaches 0.95.
    """
    rng = np.random.default_rng(rng)
    if noise_std < 0:
        raise ValueError("noise_std must be >= 0")
    n = g.n
    mags = rng.uniform(*COEF_RANGE, size=(n, n))
    signs = rng.choice([-1.0, 1.0], size=(n, n))
    coef = (np.where(g.adj, mags * signs, 0.0)).T
    rho = float(np.max(np.abs(np.linalg.eigvals(coef)))) if n else 0.0
    if rho >= RHO_CAP:
        coef = coef * (RHO_CAP / rho)
    return VarSystem(coef, float(noise_std), int(length))


def var_simulate(g: DirectedGraph, noise_std: float, length: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    system = random_var_system(g, noise_std, length, rng)
    return system.simulate(rng)


class EstimationError(ValueError):
    pass


@dataclass(frozen=True)
class VarFit:
    coefficients: np.ndarray  # x_t ~ coefficients @ x_{t-1}
    residual_corr: np.ndarray


def fit_var1(series: np.ndarray, u: int = 1) -> VarFit:
    """Least-squares VAR(1) on every ``u``-th sample, no intercept."""
    series = np.asarray(series, dtype=float)
    n = series.shape[0]
    sub = series[:, ::u]
    if sub.shape[1] - 1 < 10 * n:
        raise EstimationError(
            f"need at least {10 * n} subsampled steps, got {sub.shape[1] - 1}"
        )
    prev = sub[:, :-1].T
    nxt = sub[:, 1:].T
    if np.linalg.matrix_rank(prev) < n:
        raise EstimationError("regressors are rank deficient")
    beta, *_ = np.linalg.lstsq(prev, nxt, rcond=None)
    resid = nxt - prev @ beta
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.corrcoef(resid.T) if n > 1 else np.ones((1, 1))
    corr = np.nan_to_num(np.atleast_2d(corr), nan=0.0)
    return VarFit(beta.T, corr)


def graph_from_fit(fit: VarFit, threshold_d: float, threshold_b: float) -> MixedGraph:
    n = fit.coefficients.shape[0]
    directed = (np.abs(fit.coefficients) > threshold_d).T
    upper = np.triu(np.abs(fit.residual_corr) > threshold_b, 1)
    pairs = frozenset((int(i) + 1, int(j) + 1) for i, j in zip(*np.nonzero(upper)))
    return MixedGraph(n, directed, pairs)


def estimate_h(
    series: np.ndarray,
    u: int,
    threshold_d: float = THRESHOLD_D,
    threshold_b: float = THRESHOLD_B,
) -> MixedGraph:
    """Observed graph from a VAR(1) fit at stride ``u``.

    Edge j->i when |coef[i, j]| exceeds ``threshold_d``; {i, j} bidirected
    when the residual correlation exceeds ``threshold_b`` in magnitude.
    """
    return graph_from_fit(fit_var1(series, u), threshold_d, threshold_b)


CRITERIA = ("gt_u", "h", "gt1")


@dataclass(frozen=True)
class ThreeWayReport:
    err_vs_gt_u: ErrorReport
    err_vs_h: ErrorReport
    err_vs_gt1: ErrorReport

    def by_name(self, name: str) -> ErrorReport:
        return {"gt_u": self.err_vs_gt_u, "h": self.err_vs_h, "gt1": self.err_vs_gt1}[name]


@dataclass(frozen=True)
class VarBenchResult:
    seed: int
    u: int
    optimum: Optional[CostVector]
    class_size: int
    complete: bool
    rows: dict  # criterion -> (chosen rate, ThreeWayReport)
    naive: ErrorReport = field(default=None)


def three_way(sol_graph: DirectedGraph, sol_u: int, truth: DirectedGraph, true_u: int,
              observed: MixedGraph) -> ThreeWayReport:
    """Errors of one solution: at its own rate vs the truth at the true rate and vs
    the observed graph, and at rate 1 vs the truth."""
    opt_u = undersample(sol_graph, sol_u)
    return ThreeWayReport(
        err_vs_gt_u=error_report(opt_u, undersample(truth, true_u)),
        err_vs_h=error_report(opt_u, observed),
        err_vs_gt1=error_report(as_mixed(sol_graph), as_mixed(truth)),
    )


def _rate_pair(missing, truth_count, spurious, slots):
    """Vectorised :func:`_rates` (same float operations, so the same values)."""
    truth_count = np.asarray(truth_count, dtype=np.int64)
    om = np.where(truth_count > 0, missing / np.maximum(truth_count, 1), 0.0)
    free = slots - truth_count
    com = np.where(free > 0, spurious / np.maximum(free, 1), 0.0)
    return om, com


def _member_totals(sols, truth: DirectedGraph, true_u: int, observed: MixedGraph) -> dict:
    """Summed error of every class member under each criterion, as arrays."""
    n = truth.n
    gt_u = undersample(truth, true_u)
    rows_of = _kernels.rows_from_matrix
    counts = _kernels.member_confusion(
        sols.rows, sols.rates, rows_of(truth.adj),
        rows_of(gt_u.directed), rows_of(gt_u.bidirected_matrix),
        rows_of(observed.directed), rows_of(observed.bidirected_matrix),
    )
    tp_d, est_d, tp_b, est_b = counts[:, 0], counts[:, 1], counts[:, 2], counts[:, 3]
    pairs = n * (n - 1) // 2

    def total(tpd, td, tpb, tb, estd, estb):
        om_d, com_d = _rate_pair(td - tpd, td, estd - tpd, n * n)
        om_b, com_b = _rate_pair(tb - tpb, tb, estb - tpb, pairs)
        return om_d + com_d + om_b + com_b

    zero = np.zeros(len(sols), dtype=np.int64)
    return {
        "gt_u": total(tp_d, int(gt_u.directed.sum()), tp_b, len(gt_u.bidirected), est_d, est_b),
        "h": total(counts[:, 4], int(observed.directed.sum()), counts[:, 5],
                   len(observed.bidirected), est_d, est_b),
        "gt1": total(counts[:, 6], int(truth.adj.sum()), zero, 0, counts[:, 7], zero),
    }


def var_benchmark(
    n: int,
    density: float,
    u: int,
    noise_std: float,
    length: int,
    cfg: SolverConfig | None = None,
    seed: int = 0,
    shortcut: bool = False,
    threshold_d: float = THRESHOLD_D,
    threshold_b: float = THRESHOLD_B,
    adaptive_w_max: int = 0,
) -> VarBenchResult:
    """Graph -> VAR series -> estimated observed graph -> solve -> three selections.

    With ``shortcut`` the observed graph is the exact undersampled truth and
    no series is simulated. For each criterion the class member with the
    smallest error under it is chosen (ties broken by the remaining
    criteria, then canonical order) and all three errors are reported.
    ``adaptive_w_max > 0`` weights observed edges by fitted strength.
    """
    graph_seed, sim_seed = np.random.SeedSequence(seed).spawn(2)
    g = random_graph(n, density, graph_seed)
    if shortcut:
        observed = undersample(g, u)
        hyp = WeightedHypothesis.uniform(observed)
    else:
        series = var_simulate(g, noise_std, length, sim_seed)
        fit = fit_var1(series, u)
        observed = graph_from_fit(fit, threshold_d, threshold_b)
        if adaptive_w_max > 0:
            hyp = weighted_from_strengths(
                observed, np.abs(fit.coefficients).T, np.abs(fit.residual_corr), adaptive_w_max
            )
        else:
            hyp = WeightedHypothesis.uniform(observed)
    cfg = cfg or SolverConfig(max_u=max(u, 4))
    sols = solve(hyp, cfg)
    totals = _member_totals(sols, g, u, observed)
    rows = {}
    for crit in CRITERIA:
        order = (crit,) + tuple(c for c in ("gt1", "gt_u", "h") if c != crit)
        if not len(sols):
            continue
        # lexsort is stable, so ties keep the canonical (first) member
        idx = int(np.lexsort([totals[c] for c in reversed(order)])[0])
        chosen = sols[idx]
        rows[crit] = (chosen.u, three_way(chosen.graph, chosen.u, g, u, observed))
    naive = error_report(MixedGraph(n, observed.directed), as_mixed(g))
    return VarBenchResult(seed, u, sols.optimum, len(sols), sols.complete, rows, naive)


def run_var(
    n: int,
    density: float,
    rates,
    trials: int,
    seed: int,
    noise_std: float,
    length: int,
    cfg: SolverConfig | None = None,
    shortcut: bool = False,
    workers: int = 1,
    **kwargs,
):
    rates = list(rates)
    jobs = [(seed + t, rates[t % len(rates)]) for t in range(trials)]

    def one(job):
        s, u = job
        return var_benchmark(n, density, u, noise_std, length, cfg, s, shortcut, **kwargs)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, jobs))
    else:
        results = [one(j) for j in jobs]
    return sorted(results, key=lambda r: r.seed)


# --------------------------------------------------------------------------
# CSV

BASE_COLUMNS = [
    "trial", "seed", "u", "cost", "criterion",
    "omission_d", "commission_d", "omission_b", "commission_b", "f1",
]
EDGEBREAK_COLUMNS = BASE_COLUMNS + ["deleted", "deleted_weight", "truth_cost", "class_size", "complete"]
VAR_COLUMNS = BASE_COLUMNS + ["chosen_u", "class_size", "complete"] + [
    f"{m}_{c}" for c in CRITERIA
    for m in ("omission_d", "commission_d", "omission_b", "commission_b", "f1")
]


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _report_cells(r: ErrorReport) -> list[str]:
    return [_fmt(r.omission_d), _fmt(r.commission_d), _fmt(r.omission_b),
            _fmt(r.commission_b), _fmt(r.f1)]


def edgebreak_csv(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EDGEBREAK_COLUMNS)
    for t, r in enumerate(results):
        deleted = f"{r.deleted[0]}:{r.deleted[1]}:{r.deleted[2]}"
        for name in ("best", "blind", "naive"):
            rep = getattr(r, name)
            w.writerow([t, r.seed, r.u, str(r.optimum), name, *_report_cells(rep),
                        deleted, r.deleted_weight, str(r.truth_cost), r.class_size, int(r.complete)])
    return buf.getvalue()


def var_csv(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(VAR_COLUMNS)
    for t, r in enumerate(results):
        for crit in CRITERIA:
            if crit not in r.rows:
                continue
            chosen_u, rep = r.rows[crit]
            extra = []
            for c in CRITERIA:
                extra += _report_cells(rep.by_name(c))
            w.writerow([t, r.seed, r.u, str(r.optimum), crit,
                        *_report_cells(rep.by_name(crit)),
                        chosen_u, r.class_size, int(r.complete), *extra])
    return buf.getvalue()
