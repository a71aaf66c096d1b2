"""
Closed-form reflectance physics for LiDAR returns.

Specular reflectance comes from the Fresnel equations for an interface between
air and a (possibly absorbing) material with complex index ``n + ik``. Diffuse
reflectance uses the Oren-Nayar model for rough surfaces. Two small helpers
cover environmental perturbations: water films mixing into the surface index
and diffraction-limited beam divergence.

All angles are in radians and measured from the surface normal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "AIR_INDEX",
    "WATER_INDEX",
    "ComplexIndex",
    "IncidenceGeometry",
    "RoughnessCoefficients",
    "fresnel_components",
    "fresnel_unpolarized",
    "roughness_coefficients",
    "oren_nayar_brdf",
    "oren_nayar",
    "wet_effective_index",
    "beam_divergence",
]

# floating-point spill allowed before a reflectance is considered a formula bug
_SPILL = 1e-9


@dataclass(frozen=True)
class ComplexIndex:
    """Refractive index ``n + ik`` at a single wavelength.

    ``k == 0`` is a pure dielectric.
    """

    n: float
    k: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.n) and math.isfinite(self.k)):
            raise ValueError(f"refractive index must be finite, got {self.n}+{self.k}i")
        if self.n < 0 or self.k < 0:
            raise ValueError(f"n and k must be non-negative, got {self.n}+{self.k}i")

    @property
    def value(self) -> complex:
        return complex(self.n, self.k)

    def __str__(self):
        return f"{self.n:g}+{self.k:g}i"


AIR_INDEX = ComplexIndex(1.0, 0.0)
WATER_INDEX = ComplexIndex(1.33, 0.0)


@dataclass(frozen=True)
class IncidenceGeometry:
    """Incident/reflected polar angles and the azimuthal offset between them."""

    theta_i: float
    theta_r: float
    delta_phi: float = 0.0

    def __post_init__(self):
        for name in ("theta_i", "theta_r"):
            v = getattr(self, name)
            if not math.isfinite(v) or not 0.0 <= v < math.pi / 2:
                raise ValueError(f"{name} must lie in [0, pi/2), got {v!r}")
        if not math.isfinite(self.delta_phi) or not 0.0 <= self.delta_phi < 2 * math.pi:
            raise ValueError(f"delta_phi must lie in [0, 2*pi), got {self.delta_phi!r}")


class RoughnessCoefficients(NamedTuple):
    a_coef: float
    b_coef: float


def _as_angles(theta_i):
    theta = np.asarray(theta_i, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise ValueError("incidence angle must be finite")
    if np.any(theta < 0) or np.any(theta > math.pi / 2):
        raise ValueError("incidence angle must lie in [0, pi/2]")
    return theta


def fresnel_components(index: ComplexIndex, theta_i, n_incident: float = 1.0):
    """s- and p-polarised power reflectances at an air/material interface.

    The transmitted cosine comes from complex Snell's law; the root with
    non-negative imaginary part is taken so the transmitted wave decays inside
    absorbing media. Grazing incidence returns exactly 1 for both components.

    Args:
        index: complex refractive index of the material.
        theta_i: incidence angle(s) in radians, scalar or array.
        n_incident: real index of the incident medium (air by default).

    Returns:
        tuple ``(R_s, R_p)`` with the same shape as ``theta_i``.
    """
    if index.n <= 0:
        raise ValueError(f"material index must have a positive real part, got {index}")
    theta = _as_angles(theta_i)
    n_m = index.value
    n_1 = float(n_incident)

    cos_i = np.cos(theta)
    sin_t = n_1 * np.sin(theta) / n_m
    cos_t = np.sqrt(1.0 - sin_t * sin_t + 0j)
    cos_t = np.where(cos_t.imag < 0, -cos_t, cos_t)

    r_s = np.abs((n_1 * cos_i - n_m * cos_t) / (n_1 * cos_i + n_m * cos_t)) ** 2
    r_p = np.abs((n_m * cos_i - n_1 * cos_t) / (n_m * cos_i + n_1 * cos_t)) ** 2

    grazing = theta == math.pi / 2
    r_s = np.where(grazing, 1.0, r_s)
    r_p = np.where(grazing, 1.0, r_p)
    if r_s.ndim == 0:
        return float(r_s), float(r_p)
    return r_s, r_p


def fresnel_unpolarized(index: ComplexIndex, theta_i, n_incident: float = 1.0):
    """Unpolarised specular reflectance ``(R_s + R_p) / 2``.

    Raises:
        FloatingPointError: if the raw value leaves [0, 1] by more than 1e-9,
            which would indicate a broken formula rather than rounding.
    """
    r_s, r_p = fresnel_components(index, theta_i, n_incident)
    r = 0.5 * (np.asarray(r_s) + np.asarray(r_p))
    if np.any(r < -_SPILL) or np.any(r > 1.0 + _SPILL):
        raise FloatingPointError(f"reflectance outside [0, 1]: {r}")
    r = np.clip(r, 0.0, 1.0)
    return float(r) if r.ndim == 0 else r


def roughness_coefficients(sigma: float) -> RoughnessCoefficients:
    """Oren-Nayar ``A`` and ``B`` coefficients for surface roughness ``sigma``."""
    if not math.isfinite(sigma) or sigma < 0:
        raise ValueError(f"roughness must be finite and non-negative, got {sigma!r}")
    s2 = sigma * sigma
    a = 1.0 - s2 / (2.0 * (s2 + 0.33))
    b = 0.45 * s2 / (s2 + 0.09)
    return RoughnessCoefficients(a, b)


def _check_albedo(rho):
    if not math.isfinite(rho) or not 0.0 <= rho <= 1.0:
        raise ValueError(f"diffuse albedo must lie in [0, 1], got {rho!r}")


def oren_nayar_brdf(rho, sigma, theta_i, theta_r, delta_phi):
    """Vectorised Oren-Nayar diffuse reflectance.

    ``(rho/pi) * (A + B * max(0, cos dphi) * sin(alpha) * tan(beta))`` with
    ``alpha = max(theta_i, theta_r)`` and ``beta = min(theta_i, theta_r)``.
    Angle arrays broadcast against each other; no range checking is done here.
    """
    _check_albedo(rho)
    a, b = roughness_coefficients(sigma)
    theta_i = np.asarray(theta_i, dtype=float)
    theta_r = np.asarray(theta_r, dtype=float)
    alpha = np.maximum(theta_i, theta_r)
    beta = np.minimum(theta_i, theta_r)
    azimuth = np.maximum(0.0, np.cos(delta_phi))
    out = (rho / math.pi) * (a + b * azimuth * np.sin(alpha) * np.tan(beta))
    return float(out) if out.ndim == 0 else out


def oren_nayar(material, geom: IncidenceGeometry) -> float:
    """Diffuse reflectance of ``material`` for a single validated geometry.

    ``material`` is anything with ``albedo`` and ``roughness`` attributes,
    normally a :class:`lidar_trigger.materials.MaterialSpec`.
    """
    return oren_nayar_brdf(
        material.albedo, material.roughness, geom.theta_i, geom.theta_r, geom.delta_phi
    )


def wet_effective_index(dry: ComplexIndex, coverage: float) -> ComplexIndex:
    """Surface index after a fraction ``coverage`` of it is covered by water.

    Linear mixing of the water index (1.33) and the dry index, component-wise.
    ``coverage == 0`` returns ``dry`` itself.
    """
    if not math.isfinite(coverage) or not 0.0 <= coverage <= 1.0:
        raise ValueError(f"water coverage must lie in [0, 1], got {coverage!r}")
    if coverage == 0.0:
        return dry
    f = coverage
    return ComplexIndex(
        f * WATER_INDEX.n + (1.0 - f) * dry.n,
        f * WATER_INDEX.k + (1.0 - f) * dry.k,
    )


def beam_divergence(wavelength: float, aperture: float) -> float:
    """Diffraction-limited beam divergence ``wavelength / aperture`` in radians."""
    for name, v in (("wavelength", wavelength), ("aperture", aperture)):
        if not math.isfinite(v) or v <= 0:
            raise ValueError(f"{name} must be strictly positive, got {v!r}")
    return wavelength / aperture
