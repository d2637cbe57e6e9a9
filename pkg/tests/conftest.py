import pytest

from quasiquantum.graphs import complete_graph, cycle_graph
from quasiquantum.reductions import DecomposedGraph, euler_split, full_pipeline


@pytest.fixture(scope="session")
def c5_pipeline():
    return full_pipeline(cycle_graph(5), 0.1, seed=0)


@pytest.fixture(scope="session")
def k5_decomposed():
    """K5 with an edge 3-partition: five sites plus three scapegoats, small enough to enumerate."""
    G = complete_graph(5)
    parts = tuple(frozenset(p) for p in euler_split(G))
    return DecomposedGraph(G, parts, ("V",) * 5)
