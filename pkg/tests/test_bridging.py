import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import all_open, isolate
from wedgeperc.bridging import (
    EnergyComparisonError,
    bridge_path,
    energy_comparison,
    loop_erase,
    projection_profile,
    projection_stats,
    transport_measure,
)
from wedgeperc.clusters import giant_cluster, giant_mask, label_clusters
from wedgeperc.flows import PathMeasure, edge_mass, path_measure_to_flow, psi_gauge, quadratic_gauge, random_outward_measure
from wedgeperc.lattice import box_graph
from wedgeperc.percolation import BondConfig, sample_bond


def giant_of(c):
    lab = label_clusters(c)
    return giant_mask(lab, giant_cluster(lab))


def center_in(g, gm):
    l1 = np.abs(g.coords).sum(axis=1).astype(float)
    l1[~gm] = np.inf
    return int(np.argmin(l1))


def sampled_transport(g, p, seed, n_paths=20, strategy="shortest"):
    c = sample_bond(g, p, seed)
    gm = giant_of(c)
    sink = g.degree < 2 * g.dim
    mu = random_outward_measure(g, center_in(g, gm), n_paths, np.random.default_rng(seed), sink=sink, accept=gm)
    return c, transport_measure(mu, c, strategy)


def assert_valid(tr, c):
    g = c.graph
    for p in tr.mu_prime.paths:
        assert np.all(tr.giant[p])
        if p.size > 1:
            ids = g.edge_ids(p[:-1], p[1:])
            assert np.all(ids >= 0) and np.all(c.open[ids])
    F = path_measure_to_flow(tr.mu_prime)
    assert F.conservation_error() < 1e-12
    assert abs(F.strength() - 1) < 1e-12


def straight_isolated(m=4):
    g = box_graph(2, m)
    mask = isolate(g, np.ones(g.n_edges, bool), (0, 0))
    return g, BondConfig(g, mask)


def test_loop_erase():
    assert loop_erase([1, 2, 3, 2, 4]) == [1, 2, 4]
    assert loop_erase([1, 2, 3, 1, 5]) == [1, 5]
    assert loop_erase([1, 2, 3]) == [1, 2, 3]


def test_identity_on_all_open():
    g = box_graph(2, 6)
    c = all_open(g)
    mu = random_outward_measure(g, g.index([(0, 0)])[0], 10, np.random.default_rng(0))
    tr = transport_measure(mu, c)
    assert all(len(e) == 0 for e in tr.events)
    assert len(tr.mu_prime.paths) == len(mu.paths)
    for p, q in zip(mu.paths, tr.mu_prime.paths):
        assert p.tolist() == q.tolist()
    assert np.allclose(tr.mu_prime.weights, mu.weights)
    st_ = projection_stats(tr)
    assert all(s.tolist() == [e] for s, e in zip(st_.S, st_.edges))
    rep = energy_comparison(tr, quadratic_gauge(), 2)
    assert rep.quadratic_lhs == pytest.approx(rep.quadratic_rhs, rel=1e-15)


def test_path_in_giant_is_untouched():
    g, c = straight_isolated()
    path = g.index([(-2, 1), (-1, 1), (0, 1), (1, 1)]).tolist()
    out, ev = bridge_path(path, c)
    assert out == path and ev == []


def test_isolated_vertex_detour():
    g, c = straight_isolated()
    path = g.index([(x, 0) for x in range(-3, 4)]).tolist()
    out, ev = bridge_path(path, c)
    a, b = g.index([(-1, 0), (1, 0)])
    G = nx.Graph()
    G.add_edges_from(map(tuple, g.edges[c.open].tolist()))
    assert nx.shortest_path_length(G, a, b) == 4
    assert len(out) - 1 == len(path) - 1 + 2
    assert len(ev) == 1 and ev[0].a == a and ev[0].b == b and len(ev[0].bridge) == 5
    # canonical bridge: the lexicographically smallest shortest path goes below
    assert [tuple(x) for x in g.coords[list(ev[0].bridge)]] == [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0)]


def test_projection_sets_for_isolated_vertex():
    g, c = straight_isolated()
    path = g.index([(x, 0) for x in range(-3, 4)]).tolist()
    tr = transport_measure(PathMeasure(g, (path,), [1.0]), c)
    ev = tr.events[0][0]
    swallowed = ev.removed_edges(g)
    detour = set(ev.bridge_edges(g).tolist())
    st_ = projection_stats(tr, swallowed)
    for e, S in zip(swallowed, st_.S):
        # every edge projects onto itself, plus the detour
        assert set(S.tolist()) == detour | {int(e)}
    # one-path measure through the bridge
    assert len(tr.mu_prime.paths) == 1 and tr.mu_prime.weights.tolist() == [1.0]


def test_point_mass_energy_expansion():
    # removed segment of 2 edges, bridge of 4 edges: 6 edges in total
    g, c = straight_isolated()
    path = g.index([(-1, 0), (0, 0), (1, 0)]).tolist()
    tr = transport_measure(PathMeasure(g, (path,), [1.0]), c)
    # |T(f)| = 3 on the bridge (both removed edges and f itself), 1 on removed edges;
    # sum_{f in S(e)} |T(f)| = 1 + 4 * 3 = 13 for both removed edges
    rep = energy_comparison(tr, quadratic_gauge(), 4)
    assert rep.quadratic_lhs == 4 and rep.quadratic_rhs == 26
    assert rep.cauchy_lhs == 18 and rep.cauchy_rhs == 26
    assert rep.g_lhs == 4 and rep.g_rhs == 2 * 13**3
    assert rep.ok


def test_energy_comparison_strict_raises():
    from wedgeperc.bridging import EnergyReport

    assert not EnergyReport(2, 1, 0, 0, 0, 0, 4, 0).ok
    g, c = straight_isolated()
    path = g.index([(-1, 0), (0, 0), (1, 0)]).tolist()
    tr = transport_measure(PathMeasure(g, (path,), [1.0]), c)
    with pytest.raises(ValueError):
        energy_comparison(tr, quadratic_gauge().__class__(lambda x: x, "id"))
    assert isinstance(EnergyComparisonError("x"), AssertionError)


def test_endpoint_must_be_in_giant():
    g, c = straight_isolated()
    path = g.index([(0, 0), (1, 0)]).tolist()
    with pytest.raises(ValueError):
        bridge_path(path, c)


def test_strategy_parsing():
    g, c = straight_isolated()
    path = g.index([(-1, 1), (0, 1)]).tolist()
    for s in ("shortest", "boundary(2)", ("boundary", 3)):
        assert bridge_path(path, c, strategy=s)[0] == path
    with pytest.raises(ValueError):
        bridge_path(path, c, strategy="boundary(1)")
    with pytest.raises(ValueError):
        bridge_path(path, c, strategy="zigzag")


def test_boundary_strategy_on_isolated_vertex():
    # with k=3 the weakly closed extension of the closed star at u is the L1
    # ball of radius 3; its inner 3-boundary is the annulus 2 <= |x| <= 3
    g = box_graph(2, 8)
    mask = isolate(g, np.ones(g.n_edges, bool), (0, 0))
    c = BondConfig(g, mask)
    path = g.index([(x, 0) for x in range(-5, 6)]).tolist()
    tr = transport_measure(PathMeasure(g, (path,), [1.0]), c, "boundary(3)")
    assert_valid(tr, c)
    assert tr.fallbacks == 0
    (ev,) = tr.events[0]
    assert ev.strategy == "boundary(3)"
    l1 = np.abs(g.coords[list(ev.bridge)]).sum(axis=1)
    assert np.all((l1 >= 2) & (l1 <= 3))
    assert [tuple(x) for x in g.coords[[ev.a, ev.b]]] == [(-3, 0), (3, 0)]
    assert energy_comparison(tr, psi_gauge(2, 1.5), 4).ok


def test_boundary_k2_can_be_disconnected():
    # the inner 2-boundary of an L1 ball is its outer ring, which has no
    # lattice edges, so the strategy falls back to shortest bridges
    g = box_graph(2, 8)
    mask = isolate(g, np.ones(g.n_edges, bool), (0, 0))
    c = BondConfig(g, mask)
    path = g.index([(x, 0) for x in range(-5, 6)]).tolist()
    tr = transport_measure(PathMeasure(g, (path,), [1.0]), c, "boundary(2)")
    assert tr.fallbacks == 1
    assert tr.events[0][0].strategy == "shortest(fallback)"
    assert_valid(tr, c)


def test_boundary_falls_back_without_strong_giant():
    g = box_graph(2, 16)
    c, tr = sampled_transport(g, 0.7, 1, 10, "boundary(2)")
    assert tr.fallbacks == 10
    assert_valid(tr, c)


def test_fifty_paths_p08():
    g = box_graph(2, 32)
    c, tr = sampled_transport(g, 0.8, 3, 50)
    assert_valid(tr, c)
    assert np.isfinite(np.sum(edge_mass(tr.mu_prime) ** 2))


@settings(max_examples=15)
@given(st.integers(0, 10**6), st.sampled_from([0.65, 0.75, 0.9]), st.sampled_from(["shortest", "boundary(2)", "boundary(3)"]))
def test_transport_properties(seed, p, strategy):
    g = box_graph(2, 12)
    c, tr = sampled_transport(g, p, seed, 8, strategy)
    assert_valid(tr, c)
    assert energy_comparison(tr, quadratic_gauge(), 2).ok
    assert energy_comparison(tr, psi_gauge(2, 1.5), 4).ok
    # each bridge runs between giant vertices of the original path
    for p_, evs in zip(tr.mu.paths, tr.events):
        for ev in evs:
            assert ev.a in p_.tolist() and ev.b in p_.tolist()


def test_projection_probability_decays_with_distance():
    g = box_graph(2, 32)
    trs = [sampled_transport(g, 0.8, s)[1] for s in range(200)]
    r, prob, draws = projection_profile(trs, max_r=8)
    assert draws == 1000
    assert prob[8] < prob[2]
