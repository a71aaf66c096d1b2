"""
Keeping the trigger consistent with distance
============================================

A real scanner returns fewer points from a small patch as it moves away.
The synthesized trigger follows suit: its grid gets coarser with depth until
it reaches a floor, while its physical size stays 0.2 m by 0.3 m.
"""

import numpy as np

from lidar_trigger import TriggerConfig, grid_resolution, synthesize_patch

config = TriggerConfig()

# %%
for depth in (2.0, 5.0, 10.0, 20.0, 40.0, 80.0):
    n_y, n_z = grid_resolution(config, depth)
    print(f"{depth:5.1f} m -> {n_y:3d} x {n_z:3d} = {n_y * n_z:5d} points")

# %%
# The patch lies in the local y-z plane, centred at the origin.
patch = synthesize_patch(config, 10.0)
pts = patch.points
print("\nshape", pts.shape)
print("y range", pts[:, 1].min(), pts[:, 1].max())
print("z range", pts[:, 2].min(), pts[:, 2].max())
print("intensity", np.unique(pts[:, 3]))

# %%
# A denser scale constant simply moves the floor further out.
dense = TriggerConfig(scale=1500.0)
print("\ndense config at 40 m:", grid_resolution(dense, 40.0))
