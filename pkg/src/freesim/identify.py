"""Stiffness and damping identification, model-error metrics and the
closed-form material relations used alongside them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import geometry as geo
from .dynamics import Loads
from .errors import (DegenerateData, DomainError, IncompressibilityViolated,
                     InsufficientPeaks, LengthMismatch, NonDecaying,
                     ZeroDisplacement)
from .geometry import Geometry

__all__ = [
    "StaticSample",
    "VibrationTrace",
    "DampingEstimate",
    "OgdenParams",
    "fit_stiffness",
    "fit_stiffness_groups",
    "backout_stiffness",
    "averaged_stiffness",
    "find_peaks",
    "log_decrement_damping",
    "rmsd_displacement",
    "rmsd_force_moment",
    "thin_wall_expansion",
    "ogden_energy",
]

# k_e back-out is refused this close to the critical winding angle
CRITICAL_BAND_RAD = math.radians(2.0)


class StaticSample(NamedTuple):
    pressure_Pa: float
    elongation_m: float
    rotation_rad: float
    axial_load_N: float = 0.0
    moment_Nm: float = 0.0


@dataclass(frozen=True)
class VibrationTrace:
    t: np.ndarray
    x: np.ndarray
    channel: str = "axial"

    def __post_init__(self):
        if self.channel not in ("axial", "torsional"):
            raise ValueError(f"channel must be axial or torsional, got {self.channel!r}")
        t = np.asarray(self.t, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if t.shape != x.shape or t.ndim != 1:
            raise LengthMismatch("t and x must be 1-d arrays of equal length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("trace times must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)


def fit_stiffness(samples, intercept=False):
    """Least-squares spring constant from ``(displacement, load)`` pairs.

    By default the line is forced through the origin, ``k = sum(xF)/sum(x^2)``.
    With ``intercept=True`` an ordinary straight-line fit is made and
    ``(slope, intercept)`` is returned instead.
    """
    arr = np.asarray(list(samples), dtype=float).reshape(-1, 2)
    x, f = arr[:, 0], arr[:, 1]
    if intercept:
        if x.size < 2 or np.ptp(x) == 0:
            raise DegenerateData("intercept fit needs two distinct displacements")
        xm, fm = x.mean(), f.mean()
        slope = float(np.sum((x - xm) * (f - fm)) / np.sum((x - xm) ** 2))
        return slope, float(fm - slope * xm)
    sxx = float(np.dot(x, x))
    if sxx == 0:
        raise DegenerateData("all displacements are zero")
    return float(np.dot(x, f)) / sxx


def fit_stiffness_groups(groups: Sequence[Sequence], mode="average_first"):
    """Stiffness from several specimens loaded at the same load levels.

    ``groups`` holds one ``[(displacement, load), ...]`` list per specimen.
    ``"average_first"`` averages the displacements across specimens at each
    load level and fits once; ``"average_fits"`` fits each specimen and
    averages the slopes.
    """
    if not groups:
        raise DegenerateData("no specimens given")
    if mode == "average_fits":
        return float(np.mean([fit_stiffness(g) for g in groups]))
    if mode != "average_first":
        raise ValueError(f"unknown mode {mode!r}")
    arrs = [np.asarray(g, dtype=float).reshape(-1, 2) for g in groups]
    if any(a.shape != arrs[0].shape for a in arrs):
        raise LengthMismatch("specimens must share the same load levels")
    loads = arrs[0][:, 1]
    if any(not np.allclose(a[:, 1], loads) for a in arrs):
        raise LengthMismatch("specimens must share the same load levels")
    x_mean = np.mean([a[:, 0] for a in arrs], axis=0)
    return fit_stiffness(zip(x_mean, loads))


def backout_stiffness(geom: Geometry, loads: Loads, P, s_meas, phi_meas):
    """``(k_e, k_t)`` that make a measured static pose an equilibrium.

    Raises:
        ZeroDisplacement: if either measured displacement is zero.
        DomainError: if the deformed fiber angle is within 2 degrees of the
            critical angle, where the axial back-out is ill-conditioned.
    """
    if s_meas == 0:
        raise ZeroDisplacement("elongation is zero; k_e cannot be backed out")
    if phi_meas == 0:
        raise ZeroDisplacement("rotation is zero; k_t cannot be backed out")
    gamma = geo.deformed_fiber_angle(geom, s_meas)
    r = geo.deformed_radius(geom, gamma, phi_meas)
    if P != 0 and abs(abs(gamma) - geo.critical_winding_angle()) <= CRITICAL_BAND_RAD:
        raise DomainError(
            f"fiber angle {math.degrees(gamma):.2f} deg is too close to the "
            "critical angle for an axial stiffness back-out")
    k_e = (loads.axial_force_N + geo.pressure_axial_force(r, gamma, P)) / s_meas
    k_t = (loads.moment_Nm + geo.pressure_torque(r, gamma, P)) / phi_meas
    return k_e, k_t


def averaged_stiffness(per_pressure):
    """Arithmetic means of ``k_e`` and ``k_t`` over ``(P, k_e, k_t)`` rows."""
    rows = np.asarray(list(per_pressure), dtype=float).reshape(-1, 3)
    if rows.shape[0] == 0:
        raise DegenerateData("no stiffness values to average")
    return float(rows[:, 1].mean()), float(rows[:, 2].mean())


def find_peaks(t, x):
    """Positive strict local maxima, refined with a parabola through the
    three samples around each one. Returns ``(peak_times, peak_values)``."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    idx = np.flatnonzero((x[1:-1] > x[:-2]) & (x[1:-1] > x[2:]) & (x[1:-1] > 0)) + 1
    tp, xp = [], []
    for i in idx:
        t0, t1, t2 = t[i - 1], t[i], t[i + 1]
        y0, y1, y2 = x[i - 1], x[i], x[i + 1]
        # parabola through the three points, in local coordinates
        d1, d2 = t0 - t1, t2 - t1
        denom = d1 * d2 * (d1 - d2)
        a = (d2 * (y0 - y1) - d1 * (y2 - y1)) / denom
        b = (d1 * d1 * (y2 - y1) - d2 * d2 * (y0 - y1)) / denom
        if a < 0:
            tau = -b / (2 * a)
            tp.append(t1 + tau)
            xp.append(y1 + b * tau + a * tau * tau)
        else:
            tp.append(t1)
            xp.append(y1)
    return np.array(tp), np.array(xp)


class DampingEstimate(NamedTuple):
    zeta: float
    omega_n: float
    c: float
    delta: float
    omega_d: float


def log_decrement_damping(trace: VibrationTrace, inertia_like) -> DampingEstimate:
    """Damping ratio, natural frequency and damping constant of a free decay.

    ``inertia_like`` is the end-cap mass for an axial trace or its inertia
    for a torsional one; ``c = 2 zeta omega_n * inertia_like``.

    Raises:
        InsufficientPeaks: fewer than three positive peaks.
        NonDecaying: successive peak amplitudes grow.
    """
    tp, xp = find_peaks(trace.t, trace.x)
    if xp.size < 3:
        raise InsufficientPeaks(f"need at least 3 positive peaks, found {xp.size}")
    logs = np.log(xp[:-1] / xp[1:])
    if np.any(logs < -1e-9):
        raise NonDecaying("peak amplitudes grow along the trace")
    delta = max(float(np.mean(logs)), 0.0)
    zeta = delta / math.sqrt(4 * math.pi ** 2 + delta ** 2)
    omega_d = 2 * math.pi / float(np.mean(np.diff(tp)))
    omega_n = omega_d / math.sqrt(1 - zeta ** 2)
    return DampingEstimate(zeta, omega_n, 2 * zeta * omega_n * inertia_like,
                           delta, omega_d)


def _check_pairs(a, b):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise LengthMismatch(f"lengths differ: {a.size} vs {b.size}")
    if a.size == 0:
        raise LengthMismatch("at least one sample is required")
    return a, b


def _rms(terms):
    """sqrt(mean(x^2)) scaled by max |x| first, so tiny deviations do not
    underflow to zero."""
    big = float(np.max(np.abs(terms)))
    if big == 0 or not math.isfinite(big):
        return big
    return big * math.sqrt(float(np.mean((terms / big) ** 2)))


def rmsd_displacement(exp, sim, x_max):
    """Root-mean-square deviation normalized by ``x_max``."""
    exp, sim = _check_pairs(exp, sim)
    if not x_max > 0:
        raise ValueError("x_max must be positive")
    return _rms((exp - sim) / x_max)


def rmsd_force_moment(F_exp, F_sim, M_exp, M_sim, F_max, M_max):
    """Joint force/moment RMSD, each channel normalized by its maximum."""
    F_exp, F_sim = _check_pairs(F_exp, F_sim)
    M_exp, M_sim = _check_pairs(M_exp, M_sim)
    if F_exp.size != M_exp.size:
        raise LengthMismatch("force and moment series differ in length")
    if not (F_max > 0 and M_max > 0):
        raise ValueError("F_max and M_max must be positive")
    return _rms(np.concatenate([(F_exp - F_sim) / F_max,
                                (M_exp - M_sim) / M_max])) * math.sqrt(2)


def thin_wall_expansion(p, r, b, E, nu):
    """Radial growth of a closed-end thin-walled cylinder."""
    if not (b > 0 and E > 0):
        raise ValueError("wall thickness and modulus must be positive")
    return p * r * r / (b * E) * (1 - nu / 2)


@dataclass(frozen=True)
class OgdenParams:
    """First-order Ogden material. With ``incompressible`` the volumetric
    term is dropped and ``J = 1`` is enforced; otherwise ``d`` (> 0) is the
    compressibility parameter of the ``(J - 1)^2 / d`` term."""

    mu_Pa: float
    alpha: float
    incompressible: bool = True
    d: float = 0.0

    def __post_init__(self):
        if not self.mu_Pa > 0:
            raise ValueError("mu must be positive")
        if self.alpha == 0:
            raise ValueError("alpha must be nonzero")
        if not self.incompressible and not self.d > 0:
            raise ValueError("a compressible Ogden model needs d > 0")


def ogden_energy(l1, l2, l3, params: OgdenParams):
    """Strain energy density ``(2 mu/alpha)(sum lambda_i^alpha - 3) [+ vol]``."""
    if not (l1 > 0 and l2 > 0 and l3 > 0):
        raise DomainError("principal stretches must be positive")
    J = l1 * l2 * l3
    mu, a = params.mu_Pa, params.alpha
    if params.incompressible:
        if abs(J - 1) > 1e-9:
            raise IncompressibilityViolated(f"J = {J!r} differs from 1")
        return 2 * mu / a * (l1 ** a + l2 ** a + l3 ** a - 3)
    scale = J ** (-1 / 3)
    dev = sum((scale * li) ** a for li in (l1, l2, l3))
    return 2 * mu / a * (dev - 3) + (J - 1) ** 2 / params.d
