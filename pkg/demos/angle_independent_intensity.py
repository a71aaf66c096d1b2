"""
Intensity without knowing the angle
===================================

The sensor does not know the orientation of the patch it is hitting, so the
trigger intensity is the rough-surface reflectance averaged over all viewing
geometries. Two expectations make that average closed form; here we compute
them numerically and then check the whole approximation by sampling.
"""

import math

import numpy as np

from lidar_trigger import find_material
from lidar_trigger.intensity import (
    angle_independent_diffuse,
    azimuthal_expectation_quadrature,
    hemispheric_expectation_quadrature,
    monte_carlo_constants,
    validate_approximation,
)
from lidar_trigger.optics import oren_nayar_brdf

tio2 = find_material("TitaniumDioxide")

# %%
# The azimuthal average of max(0, cos) is 1/pi and the weighted hemispheric
# average of sin^2/cos is 4/3.
for nodes in (10, 100, 1000, 100_000):
    print(f"{nodes:>7} nodes: {azimuthal_expectation_quadrature(nodes):.9f} "
          f"{hemispheric_expectation_quadrature(nodes):.9f}")
print(f"  exact      : {1 / math.pi:.9f} {4 / 3:.9f}")

mc = monte_carlo_constants(1_000_000, seed=1)
print("sampled:", {k: f"{m:.5f} +- {se:.5f}" for k, (m, se) in mc.items()})

# %%
# The reflectance changes a lot with the viewing geometry...
theta = np.radians([0, 30, 60, 80])
print("\nmonostatic reflectance:", oren_nayar_brdf(tio2.albedo, tio2.roughness, theta, theta, 0.0))

# %%
# ...but its average is a single number, used for every trigger point.
value = angle_independent_diffuse(tio2)
print(f"angle-independent value for {tio2.name}: {value:.6f}")

# %%
# Sampling the full model over the same distribution agrees with it.
report = validate_approximation(tio2, 1_000_000, seed=0)
print(f"sampled {report.sampled_mean_diffuse:.6f}, closed form {report.closed_form_diffuse:.6f}, "
      f"{report.deviation / report.std_error:.2f} standard errors apart")
