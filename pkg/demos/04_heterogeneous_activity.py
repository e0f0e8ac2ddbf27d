"""
Heterogeneous activity exponents
================================

When clusters of the same size can have different activity exponents a,
drawn from a distribution Q(a), the hazard integral is dominated by the
largest a present. Its effective exponent approaches that limit only
logarithmically in the cutoff size s*.
"""

# %%
import math

from perchazard.analysis import saddle_point_convergence
from perchazard.hazard import ActivityLaw, PercolationConstants

C2 = PercolationConstants.two_d()
law = ActivityLaw.uniform(C2.mu, C2.mu + 1, 1000)

# %%
rep = saddle_point_convergence(law, C2, [1e2, 1e4, 1e6, 1e8, 1e12])
for s, x, g in zip(rep.s_star, rep.exponent, rep.gap):
    print(f"s*={s:8.0e}  exponent {x:.4f}  gap {g:.4f}  gap*ln(s*) {g * math.log(s):.3f}")
print("limit", rep.limit)

# %% [markdown]
# The gap times ln(s*) settles near a constant: for a flat Q the correction
# to the dominant exponent decays like 1 / ln(s*).
