"""
Cluster sizes and the crash hazard
==================================

Occupy a square lattice at random, label its clusters, and turn the cluster
size distribution into a crash hazard rate. Then compare the measured
hazard with the scaling-law prediction as the occupancy approaches p_c.
"""

# %%
import numpy as np

from perchazard import percolation as perc
from perchazard.hazard import (ActivityLaw, HazardModel, MinSizeRule, PercolationConstants,
                               empirical_hazard, theoretical_hazard)

rng = np.random.default_rng(0)
C2 = PercolationConstants.two_d()

# %% [markdown]
# A single configuration: the histogram lists how many clusters of each size exist.

# %%
mask = perc.generate_reshuffled(perc.LatticeSpec(100), 0.55, rng)
hist = perc.cluster_histogram(perc.label_clusters(mask))
print("occupied sites:", mask.occupied_count, " clusters:", hist.cluster_count, " largest:", hist.largest)

# %% [markdown]
# Each cluster of size s contributes at rate s^a. With a = 2 the hazard is the
# mean cluster size seen from an occupied site, which blows up near p_c.

# %%
model = HazardModel(ActivityLaw.homogeneous(2.0), MinSizeRule.fixed(1))
for p in (0.3, 0.45, 0.55, 0.58):
    h = [empirical_hazard(perc.cluster_histogram(perc.label_clusters(
        perc.generate_reshuffled(perc.LatticeSpec(200), p, rng))), model) for _ in range(10)]
    print(f"p={p:.2f}  measured {np.mean(h):9.2f}   scaling form {theoretical_hazard(p, model):9.2f}")

# %% [markdown]
# The scaling form fixes the cutoff size only up to a prefactor and has no
# finite-size limit, so compare the growth of the two columns rather than
# their values. Both rise steeply as p -> p_c.
