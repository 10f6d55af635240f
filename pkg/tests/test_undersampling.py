import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rnr import _kernels
from rnr.graph_core import DirectedGraph, MixedGraph
from rnr.undersampling import undersample, undersample_bits, undersample_oracle

from conftest import digraphs, random_digraph

WORKED = [
    ([(1, 2), (2, 3)], 3, 1, [(1, 2), (2, 3)], []),
    ([(1, 2), (1, 3)], 3, 2, [], [(2, 3)]),
    ([(1, 2), (2, 3), (3, 1)], 3, 2, [(1, 3), (2, 1), (3, 2)], []),
    ([(1, 1), (1, 2)], 2, 2, [(1, 1), (1, 2)], [(1, 2)]),
]


@pytest.mark.parametrize("edges, n, u, directed, bidirected", WORKED)
def test_worked_examples(edges, n, u, directed, bidirected):
    g = DirectedGraph.from_edges(n, edges)
    want = MixedGraph.from_edges(n, directed, bidirected)
    assert undersample(g, u) == want
    assert undersample_oracle(g, u) == want
    assert undersample_bits(g, u) == want


def test_matches_oracle_on_200_random_graphs():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        g = random_digraph(rng, int(rng.integers(1, 7)), rng.uniform(0.1, 0.6))
        u = int(rng.integers(1, 5))
        assert undersample(g, u) == undersample_oracle(g, u)


def test_empty_graph_stays_empty():
    for u in range(1, 6):
        assert undersample_oracle(DirectedGraph.empty(4), u) == MixedGraph.empty(4)
        assert undersample(DirectedGraph.empty(4), u) == MixedGraph.empty(4)


def test_oracle_limits():
    with pytest.raises(ValueError):
        undersample_oracle(DirectedGraph.empty(9), 2)
    with pytest.raises(ValueError):
        undersample_oracle(DirectedGraph.empty(3), 7)
    with pytest.raises(ValueError):
        undersample(DirectedGraph.empty(3), 0)


@given(digraphs(max_n=6))
@settings(max_examples=100, deadline=None)
def test_identity_at_rate_one(g):
    m = undersample(g, 1)
    assert np.array_equal(m.directed, g.adj)
    assert m.bidirected == frozenset()


@given(digraphs(max_n=6), st.integers(1, 5), st.data())
@settings(max_examples=100, deadline=None)
def test_monotone_in_edge_set(g, u, data):
    extra = data.draw(st.lists(st.booleans(), min_size=g.n**2, max_size=g.n**2))
    bigger = DirectedGraph(g.n, g.adj | np.array(extra).reshape(g.n, g.n))
    assert undersample(g, u).issubgraph(undersample(bigger, u))


@given(digraphs(max_n=6), st.integers(1, 5))
@settings(max_examples=100, deadline=None)
def test_bidirected_pairs_are_canonical(g, u):
    for i, j in undersample(g, u).bidirected:
        assert i < j


@given(digraphs(max_n=8), st.integers(1, 6))
@settings(max_examples=100, deadline=None)
def test_bit_kernel_matches_matrix_route(g, u):
    assert undersample_bits(g, u) == undersample(g, u)


def test_uncompiled_kernel_matches():
    rng = np.random.default_rng(3)
    for _ in range(30):
        g = random_digraph(rng, 6, 0.3)
        rows = _kernels.rows_from_matrix(g.adj)
        a_d, a_b = np.zeros(6, np.int64), np.zeros(6, np.int64)
        b_d, b_b = np.zeros(6, np.int64), np.zeros(6, np.int64)
        _kernels.undersample_rows(rows, 3, a_d, a_b)
        _kernels.undersample_rows.py_func(rows, 3, b_d, b_b)
        assert np.array_equal(a_d, b_d) and np.array_equal(a_b, b_b)
