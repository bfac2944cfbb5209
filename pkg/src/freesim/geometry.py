"""Kinematics and pressure force terms of a single-fiber-family FREE.

A FREE (fiber-reinforced elastomeric enclosure) is described in its relaxed
state by a signed winding angle, a length and a radius. Under pressure the
free end elongates by ``s`` and rotates by ``phi``; the inextensible fiber
then fixes the deformed winding angle and radius.

All angles are radians. Positive winding angles produce negative rotation
under pressure.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .errors import DomainError, SingularityError

__all__ = [
    "Geometry",
    "DeformedConfig",
    "ElastomerParams",
    "deformed_fiber_angle",
    "deformed_radius",
    "deformed_config",
    "pressure_axial_force",
    "pressure_torque",
    "fiber_tension",
    "elastomer_force",
    "elastomer_moment",
    "critical_winding_angle",
    "extension_ratio",
]

# relative factor of the radius-denominator guard
DEN_REL_EPS = 1e-9


@dataclass(frozen=True)
class Geometry:
    """Relaxed FREE geometry.

    Attributes:
        winding_angle_rad: Signed fiber winding angle. Must satisfy
            ``0 < |angle| < pi/2``.
        length_m: Relaxed length.
        radius_m: Relaxed radius.
    """

    winding_angle_rad: float
    length_m: float
    radius_m: float

    def __post_init__(self):
        g = self.winding_angle_rad
        if not math.isfinite(g) or g == 0.0 or abs(g) >= math.pi / 2:
            raise DomainError(
                f"winding angle must satisfy 0 < |angle| < pi/2, got {g!r}")
        if not (self.length_m > 0 and math.isfinite(self.length_m)):
            raise DomainError(f"length must be positive, got {self.length_m!r}")
        if not (self.radius_m > 0 and math.isfinite(self.radius_m)):
            raise DomainError(f"radius must be positive, got {self.radius_m!r}")
        if self.radius_m > self.length_m / 10:
            warnings.warn(
                "radius exceeds a tenth of the length; the thin-tube "
                "assumption is stretched", stacklevel=3)

    @classmethod
    def from_degrees(cls, winding_angle_deg, length_m, radius_m):
        return cls(math.radians(winding_angle_deg), length_m, radius_m)

    @property
    def winding_sign(self):
        """+1 for the clockwise fiber family, -1 otherwise (sign of cot)."""
        return 1.0 if self.winding_angle_rad > 0 else -1.0

    @property
    def twist_denominator(self):
        """``L tan(Gamma) / R``, the relaxed value of the radius denominator."""
        return self.length_m * math.tan(self.winding_angle_rad) / self.radius_m


@dataclass(frozen=True)
class DeformedConfig:
    fiber_angle_rad: float
    radius_m: float
    elongation_m: float
    rotation_rad: float


@dataclass(frozen=True)
class ElastomerParams:
    """Linear elastomer stiffness and damping.

    Units: ``k_e`` N/m, ``k_t`` N m/rad, ``c_e`` N s/m, ``c_t`` N m s/rad.
    """

    k_e: float = 0.0
    k_t: float = 0.0
    c_e: float = 0.0
    c_t: float = 0.0

    def __post_init__(self):
        for name in ("k_e", "k_t", "c_e", "c_t"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise DomainError(f"{name} must be finite and >= 0, got {v!r}")


def _cot(angle):
    return math.cos(angle) / math.sin(angle)


def deformed_fiber_angle(geom: Geometry, s: float) -> float:
    """Fiber angle after the free end elongates by ``s``.

    Raises DomainError when ``(L + s) cos(Gamma) / L`` exceeds 1, i.e. the
    elongation would stretch the inextensible fiber.
    """
    L = geom.length_m
    x = (L + s) * math.cos(geom.winding_angle_rad) / L
    if not (-1.0 <= x <= 1.0):
        raise DomainError(
            f"elongation s={s!r} violates fiber inextensibility "
            f"(arccos argument {x!r})")
    return math.copysign(math.acos(x), geom.winding_angle_rad)


def deformed_radius(geom: Geometry, gamma: float, phi: float) -> float:
    """Radius for deformed fiber angle ``gamma`` and rotation ``phi``.

    The denominator ``L tan(Gamma)/R + phi`` must keep the sign of its relaxed
    value and stay away from zero; otherwise the twist has passed the point
    where the fiber helix degenerates and SingularityError is raised.
    """
    den0 = geom.twist_denominator
    den = den0 + phi
    eps = DEN_REL_EPS * abs(den0)
    if den * math.copysign(1.0, den0) <= eps:
        raise SingularityError(
            f"radius denominator {den!r} is singular at phi={phi!r}")
    return geom.length_m * math.tan(gamma) / den


def deformed_config(geom: Geometry, s: float, phi: float) -> DeformedConfig:
    gamma = deformed_fiber_angle(geom, s)
    return DeformedConfig(gamma, deformed_radius(geom, gamma, phi), s, phi)


def pressure_axial_force(r: float, gamma: float, P: float) -> float:
    """Net axial force of pressure plus fiber tension on the end cap."""
    c = _cot(gamma)
    return math.pi * r * r * P * (1.0 - 2.0 * c * c)


def pressure_torque(r: float, gamma: float, P: float) -> float:
    """Torque the tensioned fiber exerts on the end cap."""
    return -2.0 * math.pi * r ** 3 * P * _cot(gamma)


def fiber_tension(r: float, gamma: float, P: float) -> float:
    """Net fiber tension carrying the hoop load, ``2 pi r^2 P cot/sin``."""
    if gamma == 0.0:
        raise DomainError("fiber tension is undefined at a zero fiber angle")
    return 2.0 * math.pi * r * r * P * _cot(gamma) / math.sin(gamma)


def elastomer_force(p: ElastomerParams, s: float, s_dot: float) -> float:
    return -p.k_e * s - p.c_e * s_dot


def elastomer_moment(p: ElastomerParams, phi: float, phi_dot: float) -> float:
    return -p.k_t * phi - p.c_t * phi_dot


def critical_winding_angle() -> float:
    """Winding angle at which the axial pressure term vanishes, arctan(sqrt 2)."""
    return math.atan(math.sqrt(2.0))


def extension_ratio(L: float, s: float) -> float:
    if not L > 0:
        raise DomainError(f"length must be positive, got {L!r}")
    return (L + s) / L
