# %% [markdown]
# # Path measures, flows and bridging
#
# A random path measure leaves the centre of the box along L1-increasing
# paths. The induced flow has squared norm equal to the expected overlap of
# two independent paths. After percolation the paths are rewritten to stay
# in the giant cluster, and the energy of the transported measure is
# compared with that of the original one.

# %%
import numpy as np

from wedgeperc.bridging import energy_comparison, projection_profile, transport_measure
from wedgeperc.clusters import giant_cluster, giant_mask, label_clusters
from wedgeperc.flows import (
    expected_intersection,
    flow_to_path_measure,
    path_measure_to_flow,
    psi_gauge,
    quadratic_gauge,
    random_outward_measure,
    validate_gauge,
)
from wedgeperc.lattice import cube_graph
from wedgeperc.percolation import sample_bond
from wedgeperc.resistance import min_energy_flow

# %%
g = cube_graph(2, 64)
v0 = int(g.index([(32, 32)])[0])
mu = random_outward_measure(g, v0, 30, np.random.default_rng(0))
F = path_measure_to_flow(mu)
print(f"sum F^2 = {np.sum(F.values ** 2):.12f}, E|P cap Q| = {expected_intersection(mu):.12f}")

# %% [markdown]
# The energy density Psi(x) = x^2 / log(1 + 1/x)^alpha is convex and
# x^-4 Psi(x) is nonincreasing on (0, 1].

# %%
grid = np.geomspace(1e-6, 1, 1000)
print(validate_gauge(psi_gauge(2, 1.1), grid, l=4))

# %% [markdown]
# Transport the measure through a percolation configuration at p = 0.8.

# %%
c = sample_bond(g, 0.8, 3)
lab = label_clusters(c)
gm = giant_mask(lab, giant_cluster(lab))
sink = g.degree < 4
v0 = int(np.flatnonzero(gm)[np.argmin(np.abs(g.coords[gm] - 32).sum(axis=1))])
mu = random_outward_measure(g, v0, 30, np.random.default_rng(1), sink=sink, accept=gm)
tr = transport_measure(mu, c)
print(f"{sum(len(e) for e in tr.events)} bridges over {len(mu.paths)} paths")
for name, gauge, l in (("x^2", quadratic_gauge(), 2), ("Psi_2,1.5", psi_gauge(2, 1.5), 4)):
    rep = energy_comparison(tr, gauge, l)
    print(f"{name}: H(F') = {rep.g_lhs:.4f} <= {rep.g_rhs:.4f}")

# %% [markdown]
# How far does an edge get projected? Average over a few transports.

# %%
trs = []
for s in range(40):
    c = sample_bond(g, 0.8, s)
    lab = label_clusters(c)
    gm = giant_mask(lab, giant_cluster(lab))
    v = int(np.flatnonzero(gm)[np.argmin(np.abs(g.coords[gm] - 32).sum(axis=1))])
    trs.append(transport_measure(random_outward_measure(g, v, 10, np.random.default_rng(s), sink=sink, accept=gm), c))
r, prob, draws = projection_profile(trs, max_r=6)
print("P(e -> f) by distance:", " ".join(f"{x:.1e}" for x in prob))

# %% [markdown]
# Minimum-energy flows and their decomposition back into paths.

# %%
small = cube_graph(2, 16)
src = int(small.index([(8, 8)])[0])
res = min_energy_flow(small, psi_gauge(2, 1.5), src, np.flatnonzero(small.degree < 4))
nu, _ = flow_to_path_measure(res.flow)
print(f"Psi energy {res.energy:.5f} after {res.iterations} Newton steps; {len(nu.paths)} paths in the decomposition")
