"""
Bubbles and crashes
===================

Drive the occupancy up linearly. The price grows at rate kappa * h so that
it compensates the crash risk, and each crash knocks it down by kappa and
resets the occupancy. The result is a sequence of accelerating bubbles.
"""

# %%
import numpy as np

from perchazard.analysis import bubble_segments, path_summary
from perchazard.config import load_preset
from perchazard.market import run_simulation

cfg = load_preset("fig3")
cfg.lattice["L"] = 150  # smaller lattice so the demo runs in seconds

# %%
path, events = run_simulation(cfg.lattice_spec(), cfg.hazard_model(), cfg.driver_spec(), cfg.price_params(),
                              cfg.steps, cfg.mode, cfg.seed)
print(f"{len(events)} crashes")
for ev in events:
    print(f"  t={ev.t:.4f}  p={ev.p:.4f}  h={ev.h:.1f}")

# %% [markdown]
# Between crashes the log price is the running sum of log(1 + kappa h dt),
# so its curvature follows the growth of h.

# %%
for seg in bubble_segments(path, 0.9, fit_m=False):
    if seg.length >= 20:
        print(f"steps {seg.start}-{seg.stop}: mean convexity {seg.mean_convexity:.2e}")
print(path_summary(path))

# %%
from perchazard.svg import write_panels  # noqa: E402

write_panels("bubbles.svg", [
    dict(x=path.t, series={"p": path.p}, title="occupancy"),
    dict(x=path.t, series={"h": path.h}, title="hazard", logy=True),
    dict(x=path.t, series={"price": path.price}, title="price", marks=path.t[path.crash == 1]),
])
