"""
Optical-property database at 905 nm and the material selection score.

A material scores ``w * mean(R_specular) + (1 - w) * mean(R_diffuse)`` over a
sweep of incidence angles, where ``w`` trades peak return strength against
angular robustness. Diffuse reflectance is evaluated in monostatic geometry
(emitter and receiver co-located, so the reflection angle equals the incidence
angle) with the azimuthal term of the Oren-Nayar model replaced by its
expectation ``1/pi``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .optics import ComplexIndex, fresnel_unpolarized, roughness_coefficients

__all__ = [
    "MaterialSpec",
    "MaterialScore",
    "DEFAULT_TRADEOFF",
    "MAX_SCORE_ANGLE",
    "builtin_database",
    "default_angle_grid",
    "parse_database",
    "load_database",
    "find_material",
    "monostatic_diffuse",
    "score_material",
    "rank_materials",
]

DEFAULT_TRADEOFF = 0.2
MAX_SCORE_ANGLE = math.radians(80.0)


@dataclass(frozen=True)
class MaterialSpec:
    name: str
    index: ComplexIndex
    albedo: float
    roughness: float

    def __post_init__(self):
        if not self.name:
            raise ValueError("material name must be non-empty")
        if not math.isfinite(self.albedo) or not 0.0 <= self.albedo <= 1.0:
            raise ValueError(f"{self.name}: diffuse albedo must lie in [0, 1], got {self.albedo!r}")
        if not math.isfinite(self.roughness) or self.roughness < 0:
            raise ValueError(f"{self.name}: roughness must be >= 0, got {self.roughness!r}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n": self.index.n,
            "k": self.index.k,
            "rho": self.albedo,
            "sigma": self.roughness,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "MaterialSpec":
        """Build from the ``{name, n, k, rho, sigma}`` file representation."""
        if not isinstance(obj, dict):
            raise ValueError(f"material entry must be an object, got {type(obj).__name__}")
        missing = {"name", "n", "rho", "sigma"} - obj.keys()
        if missing:
            raise ValueError(f"material entry missing keys: {sorted(missing)}")
        try:
            return cls(
                name=str(obj["name"]),
                index=ComplexIndex(float(obj["n"]), float(obj.get("k", 0.0))),
                albedo=float(obj["rho"]),
                roughness=float(obj["sigma"]),
            )
        except (TypeError, ValueError) as exc:
            raise ValueError(f"invalid material entry {obj!r}: {exc}") from None


@dataclass
class MaterialScore:
    material_name: str
    avg_specular: float
    avg_diffuse: float
    combined_score: float
    rank: Optional[int] = None

    def to_dict(self) -> dict:
        return asdict(self)


def builtin_database() -> list[MaterialSpec]:
    """Candidate trigger materials with their 905 nm optical properties."""
    return [
        MaterialSpec("Aluminum", ComplexIndex(1.43, 8.33), 0.10, 0.05),
        MaterialSpec("Copper", ComplexIndex(0.23, 6.09), 0.08, 0.05),
        MaterialSpec("Paper", ComplexIndex(1.50, 0.0), 0.75, 0.80),
        MaterialSpec("TitaniumDioxide", ComplexIndex(2.51, 0.0), 0.95, 0.70),
    ]


def default_angle_grid(points: int = 81) -> np.ndarray:
    """Uniform incidence angles from 0 to 80 degrees inclusive, in radians."""
    if points < 1:
        raise ValueError(f"angle grid needs at least one point, got {points}")
    if points == 1:
        return np.zeros(1)
    return np.radians(np.linspace(0.0, 80.0, points))


def parse_database(entries) -> list[MaterialSpec]:
    """Validate a decoded JSON array of material objects."""
    if not isinstance(entries, list):
        raise ValueError("material database must be a JSON array")
    if not entries:
        raise ValueError("material database is empty")
    specs = [MaterialSpec.from_dict(e) for e in entries]
    seen = set()
    for spec in specs:
        if spec.name in seen:
            raise ValueError(f"duplicate material name {spec.name!r}")
        seen.add(spec.name)
    return specs


def load_database(path) -> list[MaterialSpec]:
    """Read a UTF-8 JSON material database file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        entries = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from None
    return parse_database(entries)


def find_material(name: str, database: Optional[Iterable[MaterialSpec]] = None) -> MaterialSpec:
    db = list(database) if database is not None else builtin_database()
    for spec in db:
        if spec.name == name:
            return spec
    known = ", ".join(s.name for s in db)
    raise KeyError(f"unknown material {name!r} (known: {known})")


def _check_grid(angle_grid) -> np.ndarray:
    grid = np.asarray(angle_grid, dtype=float).ravel()
    if grid.size == 0:
        raise ValueError("angle grid is empty")
    if not np.all(np.isfinite(grid)) or np.any(grid < 0) or np.any(grid > MAX_SCORE_ANGLE + 1e-12):
        raise ValueError("angles in the scoring grid must lie in [0, 80] degrees")
    return grid


def _check_tradeoff(tradeoff):
    if not math.isfinite(tradeoff) or not 0.0 <= tradeoff <= 1.0:
        raise ValueError(f"tradeoff weight must lie in [0, 1], got {tradeoff!r}")


def monostatic_diffuse(material: MaterialSpec, theta) -> np.ndarray:
    """Oren-Nayar reflectance with the receiver at the emitter.

    The B term carries the ``1/pi`` azimuthal expectation.
    """
    a, b = roughness_coefficients(material.roughness)
    theta = np.asarray(theta, dtype=float)
    return (material.albedo / math.pi) * (a + b / math.pi * np.sin(theta) * np.tan(theta))


def score_material(
    material: MaterialSpec,
    tradeoff: float = DEFAULT_TRADEOFF,
    angle_grid=None,
) -> MaterialScore:
    """Average specular and diffuse reflectance over ``angle_grid`` and combine them.

    Args:
        material: the candidate.
        tradeoff: weight on the specular average, in [0, 1].
        angle_grid: incidence angles in radians within [0, 80 deg];
            defaults to :func:`default_angle_grid`.

    Returns:
        MaterialScore with ``rank`` left as None.
    """
    _check_tradeoff(tradeoff)
    grid = _check_grid(default_angle_grid() if angle_grid is None else angle_grid)
    spec = float(np.mean(fresnel_unpolarized(material.index, grid)))
    diff = float(np.mean(monostatic_diffuse(material, grid)))
    combined = tradeoff * spec + (1.0 - tradeoff) * diff
    return MaterialScore(material.name, spec, diff, combined)


def rank_materials(
    specs: Iterable[MaterialSpec],
    tradeoff: float = DEFAULT_TRADEOFF,
    angle_grid=None,
) -> list[MaterialScore]:
    """Score every material and rank by descending combined score.

    Ties go to the alphabetically first name. The returned list is in rank order.
    """
    specs = list(specs)
    if not specs:
        raise ValueError("no materials to rank")
    scores = [score_material(s, tradeoff, angle_grid) for s in specs]
    scores.sort(key=lambda s: (-s.combined_score, s.material_name))
    for i, s in enumerate(scores, start=1):
        s.rank = i
    return scores
