import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wedgeperc.lattice import GaugeFunction, RegionSpec, box_graph, induced_graph
from wedgeperc.percolation import (
    BondConfig,
    dump_config,
    load_config,
    restrict,
    sample_bond,
    sample_site,
)


def test_extreme_p():
    g = box_graph(2, 5)
    assert sample_bond(g, 1.0, 3).open.all()
    assert not sample_bond(g, 0.0, 3).open.any()
    assert sample_site(g, 1.0, 3).open.all()


def test_open_fraction_binomial_bound():
    g = box_graph(2, 354)  # 2 * 709 * 708 ~ 1.004e6 edges
    assert g.n_edges > 10**6
    c = sample_bond(g, 0.5, 11)
    # 4 sigma of Binomial(n, 1/2) is 2 / sqrt(n) < 0.002
    assert abs(c.open_fraction - 0.5) < 0.002


def test_same_seed_same_config_and_seeds_differ():
    g = box_graph(3, 4)
    a, b = sample_bond(g, 0.6, 5), sample_bond(g, 0.6, 5)
    assert np.array_equal(a.open, b.open)
    assert not np.array_equal(a.open, sample_bond(g, 0.6, 6).open)


def test_bad_p():
    with pytest.raises(ValueError):
        sample_bond(box_graph(2, 2), 1.5, 0)


def test_bit_count_checked():
    with pytest.raises(ValueError):
        BondConfig(box_graph(2, 2), np.ones(3, dtype=bool))


@given(st.floats(0, 1), st.floats(0, 1), st.integers(0, 2**31))
def test_monotone_coupling(p1, p2, seed):
    g = box_graph(2, 6)
    lo, hi = sorted((p1, p2))
    a, b = sample_bond(g, lo, seed), sample_bond(g, hi, seed)
    assert np.all(~a.open | b.open)


def test_restrict_identity_and_single_edge():
    g = box_graph(2, 6)
    c = sample_bond(g, 0.5, 1)
    assert np.array_equal(restrict(c, g).open, c.open)
    e = 17
    sub = induced_graph(g.coords[g.edges[e]])
    r = restrict(c, sub)
    assert r.open.tolist() == [c.open[e]]


@given(st.integers(0, 2**31))
def test_restriction_matches_direct_sampling(seed):
    # the sampler is keyed by edge coordinates, so sampling the subgraph directly agrees
    g = box_graph(3, 6)
    W = RegionSpec(3, "wedge", gauge=GaugeFunction.log_power(2.0, 20)).graph(6)
    amb = sample_bond(g, 0.7, seed)
    assert np.array_equal(restrict(amb, W).open, sample_bond(W, 0.7, seed).open)


def test_restriction_open_fraction():
    W = RegionSpec(3, "wedge", gauge=GaugeFunction.power(1.0, 100)).graph(60)
    amb = sample_bond(box_graph(3, 60), 0.3, 2)
    r = restrict(amb, W)
    n = r.open.size
    assert abs(r.open_fraction - 0.3) < 4 * np.sqrt(0.21 / n)


def test_restrict_rejects_non_subgraph():
    with pytest.raises(ValueError):
        restrict(sample_bond(box_graph(2, 2), 0.5, 0), box_graph(2, 3))


@pytest.mark.parametrize("kind", ["bond", "site"])
def test_dump_load_roundtrip(kind):
    g = RegionSpec(3, "wedge", gauge=GaugeFunction.log_power(2.0, 20)).graph(5)
    c = sample_bond(g, 0.4, 9) if kind == "bond" else sample_site(g, 0.4, 9)
    buf = io.BytesIO()
    dump_config(c, buf)
    buf.seek(0)
    back = load_config(buf, g)
    assert type(back) is type(c)
    assert np.array_equal(back.open, c.open)
    assert back.p == c.p and back.seed == c.seed


def test_load_rejects_other_graph():
    g = box_graph(2, 4)
    buf = io.BytesIO()
    dump_config(sample_bond(g, 0.5, 0), buf)
    with pytest.raises(ValueError):
        load_config(buf.getvalue(), box_graph(2, 5))
