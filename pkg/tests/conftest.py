import sys
import random

import pytest

from colsearch.distoracle import DistanceTable
from colsearch.synthetic import grid_graph, path_graph, planar_graph
from colsearch.sultree import build_sultree

from oracles import floyd_warshall

P5_WEIGHTS = [2, 3, 1, 4]  # edges (0,1,2),(1,2,3),(2,3,1),(3,4,4)


@pytest.fixture
def p5():
    return path_graph(P5_WEIGHTS)


@pytest.fixture(scope="session")
def grid12():
    return grid_graph(12, 12, seed=3)


@pytest.fixture(scope="session")
def grid12_apsp(grid12):
    return floyd_warshall(grid12)


@pytest.fixture(scope="session")
def grid12_sul(grid12):
    return build_sultree(grid12, b=4, alpha=16, m=2, m_root=4, seed=5)


@pytest.fixture(scope="session")
def planar150():
    return planar_graph(150, seed=11)


@pytest.fixture
def table(grid12):
    return DistanceTable(grid12)


@pytest.fixture
def rng():
    return random.Random(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for num in sorted(results):
            terminalreporter.write_line(results[num])
