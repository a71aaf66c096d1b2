"""
Angle-independent LiDAR intensity for a diffuse trigger surface.

The Oren-Nayar model depends on incidence, reflection and azimuth angles that
are unknown when a trigger is pasted into a scan. Taking the expectation of the
azimuthal factor over a uniform azimuth (``1/pi``) and of ``sin^2/cos`` over the
hemisphere with cosine-weighted sampling (``4/3``) leaves

    R ~= (rho / pi) * (A + 4 B / (3 pi))

which depends only on the material. This module computes both expectation
constants by quadrature, the closed form, a Monte-Carlo check of the closed
form against the full model, and the per-point intensity modes used for
ablations.

Random draws use numpy's ``default_rng`` (PCG64) seeded with the given
integer; the seed-to-sequence mapping is whatever numpy guarantees for
``Generator.random`` and ``Generator.random`` is the only call made.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .optics import oren_nayar_brdf, roughness_coefficients

__all__ = [
    "INTENSITY_KINDS",
    "MIN_VALIDATION_SAMPLES",
    "IntensityMode",
    "ExpectationReport",
    "azimuthal_expectation_quadrature",
    "hemispheric_integrals",
    "hemispheric_expectation_quadrature",
    "angle_independent_diffuse",
    "sample_hemisphere",
    "monte_carlo_constants",
    "validate_approximation",
    "assign_intensity",
]

INTENSITY_KINDS = ("brdf", "fixed", "random", "none")
MIN_VALIDATION_SAMPLES = 10_000
_UINT64_MAX = 2**64 - 1


@dataclass(frozen=True)
class IntensityMode:
    """How trigger points get their intensity channel.

    ``brdf`` uses the angle-independent diffuse reflectance of the trigger
    material, ``fixed`` a constant, ``random`` independent uniform draws and
    ``none`` zeros.
    """

    kind: str = "brdf"
    fixed_value: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in INTENSITY_KINDS:
            raise ValueError(f"intensity kind must be one of {INTENSITY_KINDS}, got {self.kind!r}")
        if not math.isfinite(self.fixed_value) or not 0.0 <= self.fixed_value <= 1.0:
            raise ValueError(f"fixed intensity must lie in [0, 1], got {self.fixed_value!r}")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed <= _UINT64_MAX:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "fixed_value": self.fixed_value, "seed": int(self.seed)}

    @classmethod
    def from_dict(cls, obj) -> "IntensityMode":
        if isinstance(obj, str):
            return cls(kind=obj)
        return cls(
            kind=obj.get("kind", "brdf"),
            fixed_value=float(obj.get("fixed_value", 0.5)),
            seed=int(obj.get("seed", 0)),
        )


@dataclass
class ExpectationReport:
    azimuthal_expectation: float
    hemispheric_expectation: float
    closed_form_diffuse: float
    sampled_mean_diffuse: float
    sample_count: int
    std_error: float

    @property
    def deviation(self) -> float:
        return abs(self.sampled_mean_diffuse - self.closed_form_diffuse)

    def to_dict(self) -> dict:
        return asdict(self)


def _check_nodes(node_count):
    if int(node_count) != node_count or node_count < 2:
        raise ValueError(f"quadrature needs at least 2 nodes, got {node_count!r}")
    return int(node_count)


def azimuthal_expectation_quadrature(node_count: int = 100_000) -> float:
    """Mean of ``max(0, cos phi)`` over a uniform azimuth on [0, 2 pi).

    Uses the periodic rectangle rule with nodes ``2 pi k / N``; the exact
    value is ``1/pi``.
    """
    n = _check_nodes(node_count)
    phi = 2.0 * math.pi * np.arange(n) / n
    return float(np.mean(np.maximum(0.0, np.cos(phi))))


def hemispheric_integrals(node_count: int = 100_000) -> tuple[float, float]:
    """Midpoint-rule values of the integrals of ``sin^3`` and ``sin cos`` on [0, pi/2]."""
    n = _check_nodes(node_count)
    h = 0.5 * math.pi / n
    theta = (np.arange(n) + 0.5) * h
    s = np.sin(theta)
    num = float(np.sum(s**3) * h)
    den = float(np.sum(s * np.cos(theta)) * h)
    return num, den


def hemispheric_expectation_quadrature(node_count: int = 100_000) -> float:
    """Cosine-weighted hemispheric mean of ``sin^2 / cos``; the exact value is 4/3."""
    num, den = hemispheric_integrals(node_count)
    return num / den


def angle_independent_diffuse(material) -> float:
    """``(rho/pi) * (A + 4B / (3 pi))`` for a material's albedo and roughness."""
    rho = material.albedo
    if not math.isfinite(rho) or not 0.0 <= rho <= 1.0:
        raise ValueError(f"diffuse albedo must lie in [0, 1], got {rho!r}")
    a, b = roughness_coefficients(material.roughness)
    return (rho / math.pi) * (a + 4.0 * b / (3.0 * math.pi))


def sample_hemisphere(rng: np.random.Generator, count: int):
    """Draw ``(theta, delta_phi)`` pairs.

    ``theta`` has density ``2 sin cos`` on [0, pi/2) via the inverse CDF
    ``asin(sqrt(u))``; ``delta_phi`` is uniform on [0, 2 pi).
    """
    theta = np.arcsin(np.sqrt(rng.random(count)))
    delta_phi = 2.0 * math.pi * rng.random(count)
    return theta, delta_phi


def monte_carlo_constants(sample_count: int = 1_000_000, seed: int = 0) -> dict:
    """Sampled estimates of the azimuthal and hemispheric expectations.

    Returns:
        ``{"azimuthal": (mean, std_error), "hemispheric": (mean, std_error)}``.
    """
    if int(sample_count) != sample_count or sample_count < 2:
        raise ValueError(f"need at least 2 samples, got {sample_count!r}")
    rng = np.random.default_rng(seed)
    theta, delta_phi = sample_hemisphere(rng, int(sample_count))
    out = {}
    for name, values in (
        ("azimuthal", np.maximum(0.0, np.cos(delta_phi))),
        ("hemispheric", np.sin(theta) ** 2 / np.cos(theta)),
    ):
        se = float(values.std(ddof=1)) / math.sqrt(sample_count)
        out[name] = (float(values.mean()), se)
    return out


def validate_approximation(material, sample_count: int = 1_000_000, seed: int = 0) -> ExpectationReport:
    """Monte-Carlo mean of the full Oren-Nayar model against the closed form.

    Geometry is drawn from exactly the distributions the closed form averages
    over, with ``theta_i = theta_r``, so the sampled mean is an unbiased
    estimate of :func:`angle_independent_diffuse`.
    """
    if int(sample_count) != sample_count or sample_count < MIN_VALIDATION_SAMPLES:
        raise ValueError(
            f"need at least {MIN_VALIDATION_SAMPLES} samples, got {sample_count!r}"
        )
    rng = np.random.default_rng(seed)
    theta, delta_phi = sample_hemisphere(rng, int(sample_count))
    values = oren_nayar_brdf(material.albedo, material.roughness, theta, theta, delta_phi)
    values = np.asarray(values)
    std = float(values.std(ddof=1))
    return ExpectationReport(
        azimuthal_expectation=1.0 / math.pi,
        hemispheric_expectation=4.0 / 3.0,
        closed_form_diffuse=angle_independent_diffuse(material),
        sampled_mean_diffuse=float(values.mean()),
        sample_count=int(sample_count),
        std_error=std / math.sqrt(sample_count),
    )


def assign_intensity(mode: IntensityMode, material, point_count: int) -> np.ndarray:
    """Intensity for ``point_count`` trigger points under ``mode``."""
    if int(point_count) != point_count or point_count < 1:
        raise ValueError(f"point_count must be a positive integer, got {point_count!r}")
    n = int(point_count)
    if mode.kind == "brdf":
        return np.full(n, angle_independent_diffuse(material))
    if mode.kind == "fixed":
        return np.full(n, float(mode.fixed_value))
    if mode.kind == "random":
        return np.random.default_rng(int(mode.seed)).random(n)
    return np.zeros(n)
