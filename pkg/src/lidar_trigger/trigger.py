"""Digital trigger synthesis: a planar point grid of fixed physical size."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .intensity import IntensityMode, assign_intensity
from .materials import MaterialSpec, find_material

__all__ = ["TriggerConfig", "TriggerPatch", "grid_resolution", "synthesize_patch"]

# absorbs float noise in scale*size/depth before rounding up
_CEIL_SLACK = 1e-9


def _default_material() -> MaterialSpec:
    return find_material("TitaniumDioxide")


@dataclass(frozen=True)
class TriggerConfig:
    """Physical trigger size and sampling parameters.

    ``scale`` relates point spacing to range (roughly the reciprocal of the
    sensor's angular resolution); ``min_resolution`` floors the points per
    axis so far triggers do not vanish.
    """

    width: float = 0.2
    height: float = 0.3
    scale: float = 500.0
    min_resolution: int = 4
    material: MaterialSpec = field(default_factory=_default_material)
    intensity_mode: IntensityMode = field(default_factory=IntensityMode)

    def __post_init__(self):
        for name in ("width", "height", "scale"):
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0:
                raise ValueError(f"trigger {name} must be strictly positive, got {v!r}")
        if int(self.min_resolution) != self.min_resolution or self.min_resolution < 1:
            raise ValueError(f"min_resolution must be an integer >= 1, got {self.min_resolution!r}")

    def to_dict(self) -> dict:
        return {
            "w": self.width,
            "h": self.height,
            "s": self.scale,
            "m_l": int(self.min_resolution),
            "material": self.material.to_dict(),
            "intensity_mode": self.intensity_mode.to_dict(),
        }

    @classmethod
    def from_dict(cls, obj: dict, database: Optional[list[MaterialSpec]] = None) -> "TriggerConfig":
        """Parse the ``trigger`` section of a pipeline config.

        ``material`` (also read as ``material_name_or_spec``) may be a name looked up in
        ``database`` (builtin by default) or a full ``{name, n, k, rho, sigma}``
        object.
        """
        material = next(
            (obj[k] for k in ("material", "material_name_or_spec", "material_name", "material_spec") if k in obj),
            None,
        )
        if material is None:
            spec = _default_material() if database is None else find_material("TitaniumDioxide", database)
        elif isinstance(material, str):
            spec = find_material(material, database)
        else:
            spec = MaterialSpec.from_dict(material)
        mode = obj.get("intensity_mode")
        defaults = cls.__dataclass_fields__
        return cls(
            width=float(obj.get("w", defaults["width"].default)),
            height=float(obj.get("h", defaults["height"].default)),
            scale=float(obj.get("s", defaults["scale"].default)),
            min_resolution=int(obj.get("m_l", defaults["min_resolution"].default)),
            material=spec,
            intensity_mode=IntensityMode() if mode is None else IntensityMode.from_dict(mode),
        )


@dataclass
class TriggerPatch:
    """Trigger points in the patch's local frame.

    ``points`` is ``(n_y * n_z, 4)`` with columns x, y, z, intensity. The
    patch lies in the local y-z plane (x = 0) centred on the origin, ordered
    row-major with z as the outer index.
    """

    points: np.ndarray
    n_y: int
    n_z: int
    depth: float

    def __len__(self):
        return len(self.points)


def _axis_count(scale, size, depth, floor):
    return max(int(floor), math.ceil(scale * size / depth - _CEIL_SLACK))


def grid_resolution(config: TriggerConfig, depth: float) -> tuple[int, int]:
    """Points across the width and height of a trigger seen at range ``depth``.

    ``max(min_resolution, ceil(scale * size / depth))`` per axis, so density
    falls off with range while the physical size stays fixed.
    """
    if not math.isfinite(depth) or depth <= 0:
        raise ValueError(f"depth must be strictly positive, got {depth!r}")
    n_y = _axis_count(config.scale, config.width, depth, config.min_resolution)
    n_z = _axis_count(config.scale, config.height, depth, config.min_resolution)
    return n_y, n_z


def _span(size, count):
    if count == 1:
        return np.zeros(1)
    return np.linspace(-0.5 * size, 0.5 * size, count)


def synthesize_patch(config: TriggerConfig, depth: float, intensity_mode: Optional[IntensityMode] = None) -> TriggerPatch:
    """Build the trigger grid for a target at ``depth`` metres.

    Endpoints are inclusive so the extreme points realise the exact width and
    height. ``intensity_mode`` overrides the config's mode, which the poisoning
    pipeline uses to inject per-frame seeds.
    """
    n_y, n_z = grid_resolution(config, depth)
    mode = config.intensity_mode if intensity_mode is None else intensity_mode
    zz, yy = np.meshgrid(_span(config.height, n_z), _span(config.width, n_y), indexing="ij")
    points = np.zeros((n_y * n_z, 4))
    points[:, 1] = yy.ravel()
    points[:, 2] = zz.ravel()
    points[:, 3] = assign_intensity(mode, config.material, n_y * n_z)
    return TriggerPatch(points, n_y, n_z, float(depth))
