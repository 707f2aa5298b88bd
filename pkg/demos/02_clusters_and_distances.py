# %% [markdown]
# # Clusters, gaps and chemical distance
#
# Sample bond percolation on a square box, find the crossing (giant)
# cluster and the gaps around it, and compare chemical distance inside the
# giant cluster with the L1 distance.

# %%
import numpy as np

from wedgeperc.chemical import ap_tail_experiment
from wedgeperc.clusters import (
    diameter_survival,
    gaps,
    giant_cluster,
    label_clusters,
    weakly_closed_clusters,
)
from wedgeperc.lattice import cube_graph
from wedgeperc.percolation import sample_bond
from wedgeperc.stats import fit_log_linear_tail

# %%
g = cube_graph(2, 128)
c = sample_bond(g, 0.7, seed=1)
lab = label_clusters(c)
gid = giant_cluster(lab)
print(f"{lab.n_components} open clusters, giant holds {lab.sizes[gid] / g.n_vertices:.1%} of the box")

# %% [markdown]
# Gaps are the connected pieces of the complement of the giant cluster.
# Pieces touching the box boundary are censored, since their true extent is
# unknown. Pool the diameters over many samples and fit the tail.

# %%
diam = []
for seed in range(300):
    cfg = sample_bond(g, 0.8, seed)
    lab = label_clusters(cfg)
    diam += [gp.diameter for gp in gaps(cfg, giant_cluster(lab), lab) if not gp.censored]
n, surv = diameter_survival(diam, 10)
fit = fit_log_linear_tail(np.array(diam))
print("P(diam > n):", " ".join(f"{s:.2e}" for s in surv))
print(f"decay rate {fit.rate:.3f}, 95% CI [{fit.ci_low:.3f}, {fit.ci_high:.3f}]")

# %% [markdown]
# Close to p = 1 the k-weakly closed edges (closed, or near a closed edge)
# form small clusters.

# %%
w = weakly_closed_clusters(sample_bond(g, 0.98, 0), k=1)
print(f"{len(w.clusters)} weakly closed clusters, largest diameter {w.diameters.max()}")

# %% [markdown]
# Chemical distance against L1 distance for pairs in the giant cluster.

# %%
res = ap_tail_experiment(0.7, cube_graph(2, 256), pairs=2000, seeds=range(10))
print(f"99% quantile of D/L1: {res.rho_hat:.3f}; fraction with D > 3 L1: {res.fraction_exceeding(3):.4f}")
