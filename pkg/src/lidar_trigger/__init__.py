"""LiDAR trigger reflectance modelling and KITTI dataset poisoning tools."""

__version__ = "0.1.0"

from .optics import (  # noqa: E402
    ComplexIndex,
    IncidenceGeometry,
    beam_divergence,
    fresnel_unpolarized,
    oren_nayar,
    roughness_coefficients,
    wet_effective_index,
)
from .materials import (  # noqa: E402
    MaterialSpec,
    builtin_database,
    default_angle_grid,
    find_material,
    rank_materials,
    score_material,
)
from .intensity import (  # noqa: E402
    IntensityMode,
    angle_independent_diffuse,
    assign_intensity,
    validate_approximation,
)
from .trigger import TriggerConfig, grid_resolution, synthesize_patch  # noqa: E402
from .poison import AttackObjective, PoisonConfig, run_pipeline  # noqa: E402
