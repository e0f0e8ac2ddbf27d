"""
Measuring the singularity exponent
==================================

Average the hazard over many configurations on a grid of occupancies and
fit h ~ (p_c - p)^(-alpha). For a = 2 in two dimensions the exponent
predicted from cluster scaling is (a - mu) / sigma = 43/18.
"""

# %%
import numpy as np

from perchazard.analysis import fit_singularity, hazard_curve
from perchazard.hazard import ActivityLaw, HazardModel, MinSizeRule, PercolationConstants, singularity_exponent
from perchazard.percolation import LatticeSpec

C2 = PercolationConstants.two_d()
model = HazardModel(ActivityLaw.homogeneous(2.0), MinSizeRule.fixed(2))
grid = np.round(np.arange(0.42, 0.576, 0.01), 3)

# %%
curve = hazard_curve(LatticeSpec(96), model, grid, 40, "reshuffled", seed=1)
for p, h, se in zip(curve.p, curve.h_mean, curve.h_stderr):
    print(f"{p:.3f}  {h:10.3f} +/- {se:.3f}")

# %%
fit = fit_singularity(curve, C2)
print(f"alpha = {fit.exponent:.3f}  95% CI {fit.ci95[0]:.3f}..{fit.ci95[1]:.3f}")
print("theory:", singularity_exponent(2.0, C2, exact=True))

# %% [markdown]
# Finite lattices cut the divergence off once the correlation length reaches
# L, so the fitted exponent sits below the asymptotic value. Larger L moves
# it up.
