# %% [markdown]
# # Effective resistance and block renormalization
#
# Resistance from the origin to the sphere of radius n grows like log n in
# Z^2 and stays bounded in Z^3. A log^2 wedge in Z^3 also stays bounded,
# both fully open and after percolation.

# %%
import numpy as np

from wedgeperc.lattice import GaugeFunction, RegionSpec, box_graph
from wedgeperc.percolation import sample_bond
from wedgeperc.renorm import block_probability, coarse_sites, lift_check, renormalized_config
from wedgeperc.resistance import resistance_scaling

# %%
radii = [4, 8, 16, 32]
for label, region, p in (("Z2", 2, 1.0), ("Z3", 3, 1.0), ("Z3", 3, 0.7)):
    curve = resistance_scaling(region, p, radii, seeds=range(4))
    print(f"{label} p={p}: R = {np.round(curve.mean(), 4)}, increments {np.round(curve.increments(), 4)}")

wedge = RegionSpec(3, "wedge", gauge=GaugeFunction.log_power(2.0, 500))
for p in (1.0, 0.7):
    curve = resistance_scaling(wedge, p, [8, 16, 32], seeds=range(4))
    print(f"log^2 wedge p={p}: R = {np.round(curve.mean(), 4)}, skipped {curve.skipped.tolist()}")

# %% [markdown]
# Block events: the cube of side 5N/4 around Nv has one open component
# touching every face, and nothing else with diameter above N/10.

# %%
for p in (0.55, 0.6, 0.7, 0.8):
    est = block_probability(2, p, 16, range(100))
    print(f"p={p}: P(block) ~ {est.p_hat:.2f}  CI [{est.ci[0]:.2f}, {est.ci[1]:.2f}]")

# %% [markdown]
# Renormalize a configuration: coarse sites are open when their block event
# holds, and the largest open coarse cluster lifts to one fine cluster.

# %%
A = box_graph(2, 64)
grid = coarse_sites(A, 16)
c = sample_bond(A, 0.75, 2)
coarse = renormalized_config(c, grid)
ok, size = lift_check(c, grid)
print(f"{coarse.open.sum()} of {len(grid.sites)} coarse sites open; lift ok={ok} for a coarse cluster of {size}")
