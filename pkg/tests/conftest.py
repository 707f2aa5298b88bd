import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wedgeperc.lattice import box_graph, induced_graph
from wedgeperc.percolation import BondConfig

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# lines appended by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def all_open(graph):
    return BondConfig(graph, np.ones(graph.n_edges, dtype=bool))


def with_closed(graph, pairs):
    """All-open config with the edges between the given coordinate pairs closed."""
    mask = np.ones(graph.n_edges, dtype=bool)
    for a, b in pairs:
        u, v = graph.index([a, b])
        e = graph.edge_ids(u, v)[0]
        assert e >= 0
        mask[e] = False
    return BondConfig(graph, mask)


def isolate(graph, mask, pt):
    """Close every edge at the vertex with coordinates ``pt``."""
    v = graph.index([pt])[0]
    mask[(graph.edges[:, 0] == v) | (graph.edges[:, 1] == v)] = False
    return mask


@pytest.fixture(scope="session")
def box16():
    return box_graph(2, 8)


def ladder(width=6):
    """The 2 x ``width`` ladder graph {0..width-1} x {0, 1}."""
    pts = [(x, y) for x in range(width) for y in (0, 1)]
    return induced_graph(np.array(pts))
