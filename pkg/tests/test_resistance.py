from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import ladder
from wedgeperc.flows import psi_gauge, quadratic_gauge
from wedgeperc.lattice import GaugeFunction, RegionSpec, box_graph, induced_graph
from wedgeperc.percolation import sample_bond
from wedgeperc.resistance import (
    SolverError,
    UnreachableError,
    effective_resistance,
    min_energy_flow,
    resistance_scaling,
    shell_mask,
)


def dense_resistance(g, v0, sinks, mask=None):
    """Oracle: pseudo-inverse-free dense solve with grounded sinks."""
    n = g.n_vertices
    L = np.zeros((n, n))
    e = g.edges if mask is None else g.edges[mask]
    for a, b in e:
        L[a, a] += 1
        L[b, b] += 1
        L[a, b] -= 1
        L[b, a] -= 1
    # keep the free vertices of v0's component
    G = nx.Graph()
    G.add_nodes_from(range(n))
    G.add_edges_from(map(tuple, e.tolist()))
    comp = nx.node_connected_component(G, v0)
    keep = np.array(sorted(comp - set(np.asarray(sinks).tolist())))
    Lf = L[np.ix_(keep, keep)]
    b = (keep == v0).astype(float)
    x = np.linalg.solve(Lf, b)
    return x[keep == v0][0]


def straight(n):
    return induced_graph(np.array([(i, 0) for i in range(n + 1)]))


@pytest.mark.parametrize("method", ["cg", "direct"])
def test_series(method):
    g = straight(5)
    r = effective_resistance(g, 0, [5], tol=1e-14, method=method)
    assert abs(r.resistance - 5) < 1e-10


@pytest.mark.parametrize("method", ["cg", "direct"])
def test_parallel(method):
    g = box_graph(2, 1)
    sub = g.subgraph((g.coords >= 0).all(axis=1))  # unit square
    a, b = sub.index([(0, 0), (1, 1)])
    r = effective_resistance(sub, a, [b], tol=1e-14, method=method)
    assert abs(r.resistance - 1) < 1e-10


def test_series_parallel_composite():
    # 2 x 4 ladder end to end: exact rational value by series-parallel reduction
    g = ladder(4)
    a, b = g.index([(0, 0), (3, 1)])
    r = effective_resistance(g, a, [b], tol=1e-14).resistance
    # oracle from exact rational Laplacian solve
    n = g.n_vertices
    L = [[Fraction(0)] * n for _ in range(n)]
    for u, v in g.edges:
        L[u][u] += 1
        L[v][v] += 1
        L[u][v] -= 1
        L[v][u] -= 1
    keep = [i for i in range(n) if i != b]
    M = [[L[i][j] for j in keep] + [Fraction(int(i == a))] for i in keep]
    m = len(keep)
    for c in range(m):
        piv = next(r_ for r_ in range(c, m) if M[r_][c] != 0)
        M[c], M[piv] = M[piv], M[c]
        for r_ in range(m):
            if r_ != c and M[r_][c] != 0:
                f = M[r_][c] / M[c][c]
                M[r_] = [x - f * y for x, y in zip(M[r_], M[c])]
    exact = M[keep.index(a)][m] / M[keep.index(a)][keep.index(a)]
    assert abs(r - float(exact)) < 1e-10


def test_grid_center_to_boundary_matches_dense():
    g = box_graph(2, 1)
    v0 = g.index([(0, 0)])[0]
    sinks = np.flatnonzero(g.boundary | g.truncated)
    r = effective_resistance(g, v0, sinks).resistance
    assert abs(r - dense_resistance(g, v0, sinks)) < 1e-8
    assert abs(r - 0.25) < 1e-8


@given(st.integers(0, 10**6), st.floats(0.5, 1.0))
def test_matches_dense_on_random_clusters(seed, p):
    g = box_graph(2, 4)
    v0 = g.index([(0, 0)])[0]
    sinks = np.flatnonzero(shell_mask(g, 4))
    c = sample_bond(g, p, seed)
    try:
        r = effective_resistance(g, v0, sinks, tol=1e-12, edge_mask=c.open).resistance
    except UnreachableError:
        return
    assert r == pytest.approx(dense_resistance(g, v0, sinks, c.open), rel=1e-8)


@given(st.integers(0, 10**6))
def test_rayleigh_monotonicity(seed):
    g = box_graph(2, 4)
    v0 = g.index([(0, 0)])[0]
    sinks = np.flatnonzero(shell_mask(g, 4))
    hi = sample_bond(g, 0.9, seed)
    lo = sample_bond(g, 0.7, seed)  # coupled: a subset of the open edges of `hi`
    try:
        r_lo = effective_resistance(g, v0, sinks, 1e-12, edge_mask=lo.open).resistance
    except UnreachableError:
        return
    r_hi = effective_resistance(g, v0, sinks, 1e-12, edge_mask=hi.open).resistance
    assert r_hi <= r_lo * (1 + 1e-8)


def test_unreachable_and_solver_errors():
    g = straight(4)
    mask = np.ones(g.n_edges, bool)
    mask[2] = False
    with pytest.raises(UnreachableError):
        effective_resistance(g, 0, [4], edge_mask=mask)
    with pytest.raises(SolverError):
        effective_resistance(box_graph(2, 20), 0, [g.n_vertices], tol=1e-14, maxiter=2)


def test_min_energy_on_path():
    g = straight(5)
    for gauge in (quadratic_gauge(), psi_gauge(2, 1.5)):
        res = min_energy_flow(g, gauge, 0, [5])
        assert np.allclose(res.flow.values, 1.0)


def test_min_energy_quadratic_equals_resistance():
    g = box_graph(2, 4)  # 9^2
    v0 = g.index([(0, 0)])[0]
    sinks = np.flatnonzero(g.degree < 4)
    res = min_energy_flow(g, quadratic_gauge(), v0, sinks)
    r = effective_resistance(g, v0, sinks, tol=1e-12).resistance
    assert abs(res.energy - r) < 1e-6
    assert res.flow.conservation_error() < 1e-10
    assert res.gradient_residual < 1e-6


def test_min_energy_symmetric_split():
    g = box_graph(2, 1)
    sub = g.subgraph((g.coords >= 0).all(axis=1))
    a, b = sub.index([(0, 0), (1, 1)])
    res = min_energy_flow(sub, psi_gauge(3, 1.0), a, [b])
    nz = np.abs(res.flow.values)
    assert np.allclose(nz, 0.5, atol=1e-8)


def test_min_energy_psi_is_stationary():
    g = box_graph(2, 5)
    v0 = g.index([(0, 0)])[0]
    sinks = np.flatnonzero(shell_mask(g, 5))
    res = min_energy_flow(g, psi_gauge(2, 1.5), v0, sinks)
    assert res.flow.conservation_error() < 1e-10
    assert abs(res.flow.strength() - 1) < 1e-12
    assert res.gradient_residual < 1e-3
    # the optimum beats the quadratic-optimal flow in its own energy
    q = min_energy_flow(g, quadratic_gauge(), v0, sinks).flow
    assert res.energy <= float(np.sum(psi_gauge(2, 1.5)(q.values))) + 1e-12


def test_scaling_curves_p1():
    z2 = resistance_scaling(2, 1.0, [4, 8, 16], [0, 1])
    z3 = resistance_scaling(3, 1.0, [4, 8, 16], [0, 1])
    assert np.all(z2.increments() > 0) and np.all(z3.increments() > 0)
    assert np.all(z2.increments() > z3.increments())
    # Z^2: R grows like log n / (2 pi), so doubling n adds about log 2 / (2 pi)
    assert abs(z2.increments()[-1] - np.log(2) / (2 * np.pi)) < 0.005


def test_wedge_curves_shrink():
    h = GaugeFunction.log_power(2.0, 200)
    W = RegionSpec(3, "wedge", gauge=h)
    c1 = resistance_scaling(W, 1.0, [8, 16, 32], [0])
    inc = c1.increments()
    assert inc[1] < inc[0]
    c7 = resistance_scaling(W, 0.7, [8, 16, 32], range(8))
    assert c7.R.shape == (3, 8)
    assert np.all(c7.skipped <= 8)
