import sys

import numpy as np
import pytest
from hypothesis import strategies as st

from rnr.graph_core import DirectedGraph


def random_digraph(rng, n, density):
    return DirectedGraph(n, rng.random((n, n)) < density)


@st.composite
def digraphs(draw, min_n=1, max_n=5):
    n = draw(st.integers(min_n, max_n))
    bits = draw(st.lists(st.booleans(), min_size=n * n, max_size=n * n))
    return DirectedGraph(n, np.array(bits, dtype=bool).reshape(n, n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
