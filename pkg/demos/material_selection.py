"""
Choosing a trigger material
===========================

A trigger only works if the sensor sees it. Mirror-like metals send most of
the beam away unless it hits them head on, while a rough white coating sends
a modest but steady share back towards the sensor. The score below weighs
the two behaviours and ranks the builtin materials.
"""

import numpy as np

from lidar_trigger import builtin_database, default_angle_grid, rank_materials
from lidar_trigger.optics import fresnel_unpolarized

# %%
# Specular reflectance against incidence angle. Metals stay high across the
# range; the dielectrics are low until grazing incidence.
angles_deg = np.array([0, 20, 40, 60, 80])
for material in builtin_database():
    r = fresnel_unpolarized(material.index, np.radians(angles_deg))
    print(f"{material.name:<16}", " ".join(f"{v:6.3f}" for v in r))

# %%
# Rank with the default weight of 0.2 on the specular part.
print()
print("weight 0.2")
for s in rank_materials(builtin_database(), 0.2, default_angle_grid(81)):
    print(f"  {s.rank}. {s.material_name:<16} spec={s.avg_specular:.3f} "
          f"diff={s.avg_diffuse:.3f} score={s.combined_score:.3f}")

# %%
# Sweeping the weight shows where the preference flips towards metals.
print()
for weight in np.linspace(0.0, 1.0, 6):
    best = rank_materials(builtin_database(), float(weight))[0]
    print(f"weight {weight:.1f}: best is {best.material_name}")
