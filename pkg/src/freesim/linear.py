"""Linearized FREE model, rotation transfer functions and root loci.

About ``s = phi = 0`` the pressure terms reduce to ``C1 * P`` (axial) and
``-C2 * P`` (twist) with

    C1 = pi R^2 (1 - 2 cot^2 Gamma),   C2 = 2 pi R^3 cot Gamma.

Substituting the PID law into the twist equation gives a cubic closed-loop
characteristic polynomial; sweeping one gain puts it in the form
``den(s) + K num(s) = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .control import PidGains, pid_pressure
from .dynamics import BodyParams, Loads, State, TimeSeries
from .errors import DegenerateInput
from .geometry import ElastomerParams, Geometry
from .ode import solve_ode

__all__ = [
    "LinearizedPlant",
    "RationalTF",
    "RootLocus",
    "StabilityReport",
    "linearized_constants",
    "linearized_rhs",
    "simulate_linear_closed_loop",
    "open_loop_tf",
    "poly_roots",
    "poly_eval",
    "root_locus",
    "default_gain_grid",
    "classify_stability",
]


def linearized_constants(geom: Geometry):
    """``(C1, C2)`` for the relaxed geometry."""
    R = geom.radius_m
    cot = 1.0 / math.tan(geom.winding_angle_rad)
    return (math.pi * R * R * (1.0 - 2.0 * cot * cot),
            2.0 * math.pi * R ** 3 * cot)


@dataclass(frozen=True)
class LinearizedPlant:
    c1: float
    c2: float
    mass: float
    inertia: float
    k_e: float
    k_t: float
    c_e: float
    c_t: float
    winding_angle_rad: float
    radius_m: float

    @classmethod
    def from_parts(cls, geom: Geometry, body: BodyParams,
                   elas: ElastomerParams):
        c1, c2 = linearized_constants(geom)
        return cls(c1, c2, body.end_cap_mass_kg, body.end_cap_inertia_kgm2,
                   elas.k_e, elas.k_t, elas.c_e, elas.c_t,
                   geom.winding_angle_rad, geom.radius_m)

    @property
    def loop_c2(self):
        """C2 as seen by a controller that drives rotation toward the
        setpoint: the sign rule of ``pid_pressure`` makes it ``-|C2|``."""
        return -abs(self.c2)


def linearized_rhs(state, P, plant: LinearizedPlant, loads: Loads,
                   err_rate=0.0):
    """Constant-coefficient dynamics driven by pressure ``P``."""
    s, phi, s_dot, phi_dot = state[0], state[1], state[2], state[3]
    s_dd = (plant.c1 * P - plant.k_e * s - plant.c_e * s_dot
            + loads.axial_force_N) / plant.mass
    phi_dd = (-plant.c2 * P - plant.k_t * phi - plant.c_t * phi_dot
              + loads.moment_Nm) / plant.inertia
    return np.array([s_dot, phi_dot, s_dd, phi_dd, err_rate])


def simulate_linear_closed_loop(plant: LinearizedPlant, loads: Loads,
                                gains: PidGains, reference, t_end,
                                tol=(1e-6, 1e-6), state0=State(),
                                t_eval=None):
    """Closed-loop run of the linearized plant under the same PID law
    (including the pressure clamp) as the nonlinear model.

    The returned series reports the relaxed angle and radius as constants.
    """
    def f(t, y):
        P = pid_pressure(gains, reference.sample(t), y[1], y[3], y[4],
                         plant.winding_angle_rad)
        return linearized_rhs(y, P, plant, loads, y[1])

    cuts = [0.0] + sorted(b for b in set(getattr(reference, "breakpoints", ()))
                          if 0 < b < t_end) + [float(t_end)]
    y = np.asarray(state0, dtype=float)
    ts, ys = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        seg_eval = None
        if t_eval is not None:
            te = np.asarray(t_eval, dtype=float)
            seg_eval = te[(te >= a) & ((te <= b) if b == cuts[-1] else (te < b))]
        res = solve_ode(f, (a, b), y, rtol=tol[0], atol=tol[1], t_eval=seg_eval)
        keep = slice(1 if (ts and t_eval is None) else 0, None)
        ts.append(res.t[keep])
        ys.append(res.y[keep])
        y = res.y_final
    t = np.concatenate(ts)
    states = np.concatenate(ys)
    pressure = np.array([
        pid_pressure(gains, reference.sample(ti), yi[1], yi[3], yi[4],
                     plant.winding_angle_rad) for ti, yi in zip(t, states)])
    ref = np.array([reference.sample(ti).phi for ti in t])
    n = len(t)
    return TimeSeries(t, states, pressure, np.full(n, plant.winding_angle_rad),
                      np.full(n, plant.radius_m), ref)


class RationalTF(NamedTuple):
    """``num(s) / den(s)`` with coefficients in descending powers."""

    num: tuple
    den: tuple


def open_loop_tf(sweep: str, gains: PidGains, plant: LinearizedPlant,
                 direct_law=False) -> RationalTF:
    """Rotation loop written as ``1 + K num/den = 0`` for one swept gain.

    Args:
        sweep: ``"kp"``, ``"ki"`` or ``"kd"``; the other gains are fixed
            at their values in ``gains``.
        direct_law: If True use the raw ``C2``, i.e. assume the pressure is
            the PID output itself with no winding-sign correction. The
            default uses the sign-corrected loop gain, which coincides with
            the raw value for negative winding angles.
    """
    c2 = plant.c2 if direct_law else plant.loop_c2
    I, ct, kt = plant.inertia, plant.c_t, plant.k_t
    key = sweep.lower().replace("_", "")
    if key == "kp":
        return RationalTF((-c2, 0.0), (I, ct, kt, -c2 * gains.k_i))
    if key == "ki":
        return RationalTF((-c2,), (I, ct, kt - c2 * gains.k_p, 0.0))
    if key == "kd":
        return RationalTF((-c2, 0.0, 0.0),
                          (I, ct, kt - c2 * gains.k_p, -c2 * gains.k_i))
    raise ValueError(f"unknown sweep {sweep!r}; expected kp, ki or kd")


def poly_eval(coeffs, z):
    acc = 0.0
    for c in coeffs:
        acc = acc * z + c
    return acc


def _poly_deriv_eval(coeffs, z):
    n = len(coeffs) - 1
    acc = 0.0
    for i, c in enumerate(coeffs[:-1]):
        acc = acc * z + c * (n - i)
    return acc


def _polish(coeffs, z, iters=3):
    """A few Newton steps, kept only while the residual shrinks."""
    best, best_res = z, abs(poly_eval(coeffs, z))
    with np.errstate(all="ignore"):
        for _ in range(iters):
            d = _poly_deriv_eval(coeffs, best)
            if d == 0:
                break
            cand = best - poly_eval(coeffs, best) / d
            # a near-zero derivative can throw the step far away
            if not np.isfinite(cand):
                break
            res = abs(poly_eval(coeffs, cand))
            if not res < best_res:
                break
            best, best_res = cand, res
    return best


def poly_roots(coeffs: Sequence[float]) -> np.ndarray:
    """All complex roots of a real polynomial (descending coefficients).

    Eigenvalues of the companion matrix (LAPACK balances it first), then
    Newton polishing on the original coefficients. Roots at the origin from
    trailing zeros are returned exactly. Complex roots come in exact
    conjugate pairs.

    Raises:
        DegenerateInput: if every coefficient is zero.
    """
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    nz = np.flatnonzero(c)
    if nz.size == 0:
        raise DegenerateInput("the zero polynomial has no well-defined roots")
    c = c[nz[0]:nz[-1] + 1]
    n_zero = int(np.atleast_1d(coeffs).size - 1 - nz[-1])
    deg = c.size - 1
    roots = []
    if deg > 0:
        comp = np.zeros((deg, deg))
        comp[0, :] = -c[1:] / c[0]
        comp[1:, :-1] = np.eye(deg - 1)
        eig = np.linalg.eigvals(comp)
        clist = list(c)
        for z in eig:
            if z.imag == 0.0:
                roots.append(complex(_polish(clist, float(z.real))))
            elif z.imag > 0.0:
                zp = complex(_polish(clist, complex(z)))
                roots.extend([zp, zp.conjugate()])
    roots.extend([0j] * n_zero)
    return np.array(roots, dtype=complex)


@dataclass(frozen=True)
class RootLocus:
    """Closed-loop poles ``poles[i, j]`` of branch ``j`` at ``gains[i]``."""

    gains: np.ndarray
    poles: np.ndarray

    @property
    def n_branches(self):
        return self.poles.shape[1]

    def branch(self, j):
        return self.poles[:, j]


def _characteristic(tf: RationalTF, K):
    den = np.asarray(tf.den, dtype=float)
    num = np.asarray(tf.num, dtype=float)
    if num.size > den.size:
        raise ValueError("numerator degree exceeds denominator degree")
    padded = np.concatenate([np.zeros(den.size - num.size), num])
    return den + K * padded


def root_locus(tf: RationalTF, gains) -> RootLocus:
    """Poles of ``den + K num`` over an increasing gain grid.

    Branches are ordered by minimum-total-distance matching between
    consecutive gains.
    """
    K = np.asarray(gains, dtype=float)
    if K.ndim != 1 or K.size == 0:
        raise ValueError("gain grid must be a nonempty 1-d sequence")
    if np.any(K < 0) or np.any(np.diff(K) <= 0):
        raise ValueError("gain grid must be non-negative and increasing")
    rows = []
    prev = None
    for k in K:
        z = poly_roots(_characteristic(tf, k))
        if prev is not None and z.size == prev.size:
            cost = np.abs(prev[:, None] - z[None, :])
            _, col = linear_sum_assignment(cost)
            z = z[col]
        rows.append(z)
        prev = z
    width = max(r.size for r in rows)
    if any(r.size != width for r in rows):
        raise ValueError("pole count changes along the grid (leading "
                         "coefficient of den + K num vanishes)")
    return RootLocus(K, np.vstack(rows))


def default_gain_grid(k_ref, n=200):
    """Log-spaced grid over ``[k_ref/100, 100 k_ref]``."""
    if not k_ref > 0:
        raise ValueError("reference gain must be positive")
    return np.logspace(math.log10(k_ref / 100), math.log10(k_ref * 100), n)


@dataclass(frozen=True)
class StabilityReport:
    verdict: str            # "stable" | "marginal" | "unstable"
    dominant_pole: complex
    damping_ratio: float
    underdamped: bool


def classify_stability(poles) -> StabilityReport:
    """Stability verdict from the real parts, with dominant-pole damping.

    The dominant pole is the one with the largest real part. A real pole has
    damping ratio 1 (or -1 when it lies in the right half plane).
    """
    p = np.asarray(poles, dtype=complex).ravel()
    if p.size == 0:
        raise ValueError("classify_stability needs at least one pole")
    tau = 1e-9 * max(float(np.max(np.abs(p))), 1.0)
    re = p.real
    if np.any(re > tau):
        verdict = "unstable"
    elif np.any(np.abs(re) <= tau):
        verdict = "marginal"
    else:
        verdict = "stable"
    dom = complex(p[np.argmax(re)])
    mag = abs(dom)
    zeta = -dom.real / mag if mag > 0 else 0.0
    underdamped = abs(dom.imag) > tau
    return StabilityReport(verdict, dom, zeta, underdamped)
