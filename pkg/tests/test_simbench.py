import csv
import io

import numpy as np
import pytest

from rnr.graph_core import DirectedGraph, MixedGraph
from rnr.simbench import (
    EDGEBREAK_COLUMNS,
    VAR_COLUMNS,
    EstimationError,
    VarSystem,
    edge_break_trial,
    edgebreak_csv,
    error_report,
    estimate_h,
    random_graph,
    random_var_system,
    run_edgebreak,
    run_var,
    var_benchmark,
    var_csv,
    var_simulate,
)
from rnr.solver import SolverConfig


def mixed(n, d=(), b=()):
    return MixedGraph.from_edges(n, list(d), list(b))


def test_identity_report():
    g = mixed(3, [(1, 2), (2, 3)], [(1, 3)])
    r = error_report(g, g)
    assert (r.omission_d, r.commission_d, r.omission_b, r.commission_b, r.f1) == (0, 0, 0, 0, 1)


def test_half_omission():
    r = error_report(mixed(3, [(1, 2)]), mixed(3, [(1, 2), (2, 3)]))
    assert r.omission_d == 0.5
    assert r.commission_d == 0.0
    assert r.f1 == pytest.approx(2 / 3)


def test_full_commission():
    full = MixedGraph(2, np.ones((2, 2), bool), frozenset({(1, 2)}))
    r = error_report(full, mixed(2))
    assert r.commission_d == 1.0 and r.commission_b == 1.0
    assert r.omission_d == 0.0 and r.f1 == 0.0


def test_report_size_mismatch():
    with pytest.raises(ValueError):
        error_report(mixed(2), mixed(3))


def test_random_graph():
    assert random_graph(4, 1.0, 0) == DirectedGraph(4, np.ones((4, 4), bool))
    assert random_graph(4, 0.0, 0) == DirectedGraph.empty(4)
    assert random_graph(6, 0.3, 11) == random_graph(6, 0.3, 11)
    with pytest.raises(ValueError):
        random_graph(0, 0.5, 0)


def test_edge_break_trial_deterministic():
    a = edge_break_trial(5, 0.25, 2, 4)
    assert a == edge_break_trial(5, 0.25, 2, 4)
    assert a.within_truth_cost()
    assert a.class_size >= 1 and a.complete


def test_run_edgebreak_skips_empty():
    res, skipped = run_edgebreak(3, 0.9, [2], 3, seed=0)
    assert len(res) == 3 and skipped == []
    assert [r.seed for r in res] == [0, 1, 2]


def test_edgebreak_csv_three_rows_per_trial():
    res, _ = run_edgebreak(4, 0.3, [2, 3], 2, seed=1)
    rows = list(csv.reader(io.StringIO(edgebreak_csv(res))))
    assert rows[0] == EDGEBREAK_COLUMNS
    assert len(rows) == 1 + 3 * len(res)
    assert all(len(r) == len(EDGEBREAK_COLUMNS) for r in rows)


def test_noiseless_series_is_zero():
    g = random_graph(4, 0.4, 0)
    assert np.all(var_simulate(g, 0.0, 50, 1) == 0)


def test_spectral_radius_capped():
    rng = np.random.default_rng(0)
    for _ in range(50):
        g = random_graph(5, 0.8, rng.integers(1 << 30))
        system = random_var_system(g, 1.0, 10, rng)
        assert system.spectral_radius < 0.95 + 1e-9
        assert np.all((system.coefficients != 0) == g.adj.T)


def test_ar1_autocovariance():
    a, sigma = 0.6, 1.0
    series = VarSystem(np.array([[a]]), sigma, 100_000).simulate(np.random.default_rng(5))[0]
    x = series - series.mean()
    lag1 = float(np.mean(x[1:] * x[:-1]))
    expected = a * sigma**2 / (1 - a**2)
    assert abs(lag1 - expected) <= 0.1 * expected


def test_estimate_recovers_support():
    g = DirectedGraph.from_edges(3, [(1, 2), (2, 3), (3, 3)])
    series = var_simulate(g, 1e-6, 100_000, 2)
    # rescale so the default thresholds act on unit-variance data
    est = estimate_h(series / 1e-6, 1)
    assert np.array_equal(est.directed, g.adj)
    assert est.bidirected == frozenset()


def test_estimate_thresholds_above_one_are_empty():
    series = var_simulate(random_graph(3, 0.5, 1), 1.0, 2000, 3)
    est = estimate_h(series, 1, threshold_d=1.0, threshold_b=1.0)
    assert est == MixedGraph.empty(3)


def test_estimate_errors():
    with pytest.raises(EstimationError):
        estimate_h(np.random.default_rng(0).normal(size=(3, 20)), 1)
    flat = np.ones((2, 500))
    with pytest.raises(EstimationError):
        estimate_h(flat, 1)


def test_shortcut_reports_zero():
    for seed in range(3):
        res = var_benchmark(5, 0.25, 2, 0.0, 0, SolverConfig(max_u=3), seed=seed, shortcut=True)
        for crit in ("gt_u", "h", "gt1"):
            _, rep = res.rows[crit]
            for name in ("gt_u", "h", "gt1"):
                assert rep.by_name(name).total == 0


def test_var_csv_rows():
    res = run_var(4, 0.3, [2], 2, 0, 1.0, 2000, SolverConfig(max_u=3))
    rows = list(csv.reader(io.StringIO(var_csv(res))))
    assert rows[0] == VAR_COLUMNS
    assert len(rows) == 1 + 3 * len(res)


def test_var_pipeline_deterministic():
    a = var_benchmark(4, 0.3, 2, 1.0, 2000, SolverConfig(max_u=3), seed=7)
    b = var_benchmark(4, 0.3, 2, 1.0, 2000, SolverConfig(max_u=3, workers=4), seed=7)
    assert a == b



def test_empty_observation_is_skipped():
    from rnr.simbench import TrialSkipped

    with pytest.raises(TrialSkipped):
        edge_break_trial(4, 0.0, 2, 0)
    res, skipped = run_edgebreak(3, 0.1, [2], 2, seed=0)
    assert len(res) == 2
    assert all(s not in [r.seed for r in res] for s in skipped)


def _reference_rows(res_seed, n, u, noise, length, cfg, shortcut):
    """Per-member selection written out directly with three_way."""
    from rnr.graph_core import WeightedHypothesis
    from rnr.simbench import CRITERIA, fit_var1, graph_from_fit, three_way
    from rnr.solver import solve
    from rnr.undersampling import undersample

    graph_seed, sim_seed = np.random.SeedSequence(res_seed).spawn(2)
    g = random_graph(n, 0.3, graph_seed)
    if shortcut:
        observed = undersample(g, u)
    else:
        observed = graph_from_fit(fit_var1(var_simulate(g, noise, length, sim_seed), u), 0.1, 0.2)
    sols = solve(WeightedHypothesis.uniform(observed), cfg)
    reports = [three_way(s.graph, s.u, g, u, observed) for s in sols]
    rows = {}
    for crit in CRITERIA:
        order = (crit,) + tuple(c for c in ("gt1", "gt_u", "h") if c != crit)
        idx = min(range(len(reports)), key=lambda k: tuple(reports[k].by_name(c).total for c in order))
        rows[crit] = (sols[idx].u, reports[idx])
    return rows


@pytest.mark.parametrize("shortcut", [True, False])
def test_vectorised_selection_matches_reference(shortcut):
    cfg = SolverConfig(max_u=3)
    for seed in range(6):
        u = 2 + seed % 2
        res = var_benchmark(4, 0.3, u, 1.0, 3000, cfg, seed=seed, shortcut=shortcut)
        assert res.rows == _reference_rows(seed, 4, u, 1.0, 3000, cfg, shortcut)
