"""Nonlinear two-degree-of-freedom end-cap dynamics of a FREE.

State vector layout (``State.as_array``)::

    [s, phi, s_dot, phi_dot, err_int]

``err_int`` is the running integral of ``phi`` used by the PID integral term;
it is only advanced in closed-loop runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import geometry as geo
from .control import PidGains, pid_pressure
from .errors import DomainError, NoConvergence, SingularityError
from .geometry import ElastomerParams, Geometry
from .ode import solve_ode
from .units import GRAVITY

__all__ = [
    "BodyParams",
    "Loads",
    "State",
    "TimeSeries",
    "FreeModel",
    "rhs",
    "integrate",
    "simulate_constant_pressure",
    "simulate_closed_loop",
    "static_equilibrium",
    "static_residuals",
]

DEFAULT_TOL = (1e-6, 1e-6)


@dataclass(frozen=True)
class BodyParams:
    """End-cap mass (kg) and polar inertia (kg m^2)."""

    end_cap_mass_kg: float
    end_cap_inertia_kgm2: float

    def __post_init__(self):
        if not (self.end_cap_mass_kg > 0 and self.end_cap_inertia_kgm2 > 0):
            raise ValueError("end-cap mass and inertia must be positive")

    @classmethod
    def thin_ring(cls, mass_kg, radius_m):
        """Inertia ``m R^2``, the convention of the original simulation
        scripts. A solid disk cap would be half of this; pass the inertia
        explicitly when that matters."""
        return cls(mass_kg, mass_kg * radius_m ** 2)


@dataclass(frozen=True)
class Loads:
    axial_force_N: float = 0.0
    moment_Nm: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.axial_force_N) and math.isfinite(self.moment_Nm)):
            raise ValueError("loads must be finite")

    @classmethod
    def weight(cls, mass_kg, g=GRAVITY, moment_Nm=0.0):
        """Axial load equal to the end-cap weight (gravity is never implicit)."""
        return cls(mass_kg * g, moment_Nm)


class State(NamedTuple):
    s: float = 0.0
    phi: float = 0.0
    s_dot: float = 0.0
    phi_dot: float = 0.0
    err_int: float = 0.0

    def as_array(self):
        return np.array(self, dtype=float)


@dataclass
class TimeSeries:
    """Sampled trajectory of a run.

    ``states`` has shape ``(n, 5)``; ``gamma`` and ``radius`` are the deformed
    fiber angle and radius at every sample; ``reference`` holds the commanded
    angle for closed-loop runs and is None otherwise.
    """

    t: np.ndarray
    states: np.ndarray
    pressure_Pa: np.ndarray
    gamma: np.ndarray
    radius: np.ndarray
    reference: Optional[np.ndarray] = None
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.t)
        for name in ("states", "pressure_Pa", "gamma", "radius"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length differs from t")
        if n > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("time samples must be strictly increasing")

    def __len__(self):
        return len(self.t)

    @property
    def s(self):
        return self.states[:, 0]

    @property
    def phi(self):
        return self.states[:, 1]

    @property
    def s_dot(self):
        return self.states[:, 2]

    @property
    def phi_dot(self):
        return self.states[:, 3]

    @property
    def err_int(self):
        return self.states[:, 4]

    def final_state(self):
        return State(*map(float, self.states[-1]))


def rhs(state, P, geom: Geometry, body: BodyParams, elas: ElastomerParams,
        loads: Loads, err_rate=0.0):
    """Time derivative of the state at pressure ``P``.

    ``err_rate`` is the derivative of the integral channel (0 in open loop).
    Geometry errors (over-elongation, singular twist) propagate.
    """
    s, phi, s_dot, phi_dot = state[0], state[1], state[2], state[3]
    gamma = geo.deformed_fiber_angle(geom, s)
    r = geo.deformed_radius(geom, gamma, phi)
    f_axial = (loads.axial_force_N + geo.elastomer_force(elas, s, s_dot)
               + geo.pressure_axial_force(r, gamma, P))
    m_twist = (loads.moment_Nm + geo.elastomer_moment(elas, phi, phi_dot)
               + geo.pressure_torque(r, gamma, P))
    return np.array([s_dot, phi_dot, f_axial / body.end_cap_mass_kg,
                     m_twist / body.end_cap_inertia_kgm2, err_rate])


@dataclass(frozen=True)
class FreeModel:
    """A FREE plus its pressure source.

    With ``gains`` and ``reference`` set, pressure comes from the PID law and
    the integral channel integrates ``phi``; otherwise ``pressure`` is used,
    either a constant or a callable of time.
    """

    geometry: Geometry
    body: BodyParams
    elastomer: ElastomerParams
    loads: Loads = Loads()
    pressure: float | Callable[[float], float] = 0.0
    gains: Optional[PidGains] = None
    reference: object = None

    @property
    def closed_loop(self):
        return self.gains is not None and self.reference is not None

    def pressure_at(self, t, y):
        if self.closed_loop:
            ref = self.reference.sample(t)
            return pid_pressure(self.gains, ref, y[1], y[3], y[4],
                                self.geometry.winding_angle_rad)
        if callable(self.pressure):
            return float(self.pressure(t))
        return float(self.pressure)

    def derivative(self, t, y):
        P = self.pressure_at(t, y)
        return rhs(y, P, self.geometry, self.body, self.elastomer, self.loads,
                   y[1] if self.closed_loop else 0.0)

    @property
    def breakpoints(self):
        if self.closed_loop:
            return tuple(getattr(self.reference, "breakpoints", ()))
        return ()


def integrate(model: FreeModel, state0=State(), t_span=(0.0, 1.0),
              tol=DEFAULT_TOL, t_eval=None, max_step=math.inf) -> TimeSeries:
    """Adaptive Dormand-Prince solution of ``model`` over ``t_span``.

    The interval is split at the model's breakpoints (reference switches) so
    no step straddles a discontinuity. Without ``t_eval`` every accepted step
    is returned; with it, dense-output samples at those times.
    """
    t0, t1 = map(float, t_span)
    rtol, atol = tol
    cuts = [t0] + sorted(b for b in set(model.breakpoints) if t0 < b < t1) + [t1]
    y = np.asarray(state0, dtype=float)
    ts, ys = [], []
    nfev = n_acc = n_rej = 0
    for a, b in zip(cuts[:-1], cuts[1:]):
        seg_eval = None
        if t_eval is not None:
            te = np.asarray(t_eval, dtype=float)
            last = b == t1
            mask = (te >= a) & ((te <= b) if last else (te < b))
            seg_eval = te[mask]
        res = solve_ode(model.derivative, (a, b), y, rtol=rtol, atol=atol,
                        t_eval=seg_eval, max_step=max_step)
        nfev += res.nfev
        n_acc += res.n_accepted
        n_rej += res.n_rejected
        if t_eval is None:
            keep = slice(0 if not ts else 1, None)
            ts.append(res.t[keep])
            ys.append(res.y[keep])
        else:
            ts.append(res.t)
            ys.append(res.y)
        y = res.y_final
    t = np.concatenate(ts) if ts else np.empty(0)
    states = np.concatenate(ys) if ys else np.empty((0, 5))
    series = _build_series(model, t, states)
    series.stats.update(nfev=nfev, n_accepted=n_acc, n_rejected=n_rej)
    return series


def _build_series(model, t, states):
    n = len(t)
    pressure = np.empty(n)
    gamma = np.empty(n)
    radius = np.empty(n)
    reference = np.empty(n) if model.closed_loop else None
    for i in range(n):
        y = states[i]
        pressure[i] = model.pressure_at(t[i], y)
        gamma[i] = geo.deformed_fiber_angle(model.geometry, y[0])
        radius[i] = geo.deformed_radius(model.geometry, gamma[i], y[1])
        if reference is not None:
            reference[i] = model.reference.sample(t[i]).phi
    return TimeSeries(t, states, pressure, gamma, radius, reference)


def simulate_constant_pressure(geom, body, elas, loads, P, t_end,
                               tol=DEFAULT_TOL, state0=State(), t_eval=None):
    """Open-loop response to a pressure held constant from t = 0."""
    if not P >= 0:
        raise ValueError(f"pressure must be >= 0, got {P!r}")
    model = FreeModel(geom, body, elas, loads, pressure=float(P))
    return integrate(model, state0, (0.0, t_end), tol, t_eval)


def simulate_closed_loop(geom, body, elas, loads, controller: PidGains,
                         reference, t_end, tol=DEFAULT_TOL, state0=State(),
                         t_eval=None):
    """PID-controlled rotation tracking ``reference``.

    Pressure is recomputed at every derivative evaluation and clamped to
    ``[0, controller.p_max]``.
    """
    model = FreeModel(geom, body, elas, loads, gains=controller,
                      reference=reference)
    return integrate(model, state0, (0.0, t_end), tol, t_eval)


def static_residuals(s, phi, geom, elas, loads, P):
    """Net static force (N) and moment (N m) on the end cap at ``(s, phi)``."""
    gamma = geo.deformed_fiber_angle(geom, s)
    r = geo.deformed_radius(geom, gamma, phi)
    f = loads.axial_force_N - elas.k_e * s + geo.pressure_axial_force(r, gamma, P)
    m = loads.moment_Nm - elas.k_t * phi + geo.pressure_torque(r, gamma, P)
    return f, m


def _residual_jacobian(s, phi, geom, elas, P):
    L = geom.length_m
    gamma = geo.deformed_fiber_angle(geom, s)
    r = geo.deformed_radius(geom, gamma, phi)
    den = geom.twist_denominator + phi
    sin_g, cos_g = math.sin(gamma), math.cos(gamma)
    cot = cos_g / sin_g
    csc2 = 1.0 / (sin_g * sin_g)
    dg_ds = -math.cos(geom.winding_angle_rad) / (L * sin_g)
    dr_ds = L / (cos_g * cos_g) * dg_ds / den
    dr_dphi = -r / den
    # axial term pi r^2 (1 - 2 cot^2) and twist term 2 pi r^3 cot, per unit P
    a_ds = (2 * math.pi * r * dr_ds * (1 - 2 * cot * cot)
            + 4 * math.pi * r * r * cot * csc2 * dg_ds)
    a_dphi = 2 * math.pi * r * dr_dphi * (1 - 2 * cot * cot)
    b_ds = 6 * math.pi * r * r * dr_ds * cot - 2 * math.pi * r ** 3 * csc2 * dg_ds
    b_dphi = 6 * math.pi * r * r * dr_dphi * cot
    return np.array([[-elas.k_e + P * a_ds, P * a_dphi],
                     [-P * b_ds, -elas.k_t - P * b_dphi]])


def static_equilibrium(geom, elas, loads, P, tol=1e-10, max_iter=100):
    """Rest position ``(s, phi)`` under constant pressure and loads.

    Damped Newton iteration on the static force and moment balance, seeded
    with the linearized solution. The unpressurized case is solved directly.

    Raises:
        NoConvergence: after ``max_iter`` iterations.
    """
    if not (elas.k_e > 0 and elas.k_t > 0):
        raise ValueError("static equilibrium needs positive k_e and k_t")
    if P == 0:
        return loads.axial_force_N / elas.k_e, loads.moment_Nm / elas.k_t
    g, R = geom.winding_angle_rad, geom.radius_m
    cot = 1 / math.tan(g)
    c1 = math.pi * R * R * (1 - 2 * cot * cot)
    c2 = 2 * math.pi * R ** 3 * cot
    x = np.array([(loads.axial_force_N + c1 * P) / elas.k_e,
                  (loads.moment_Nm - c2 * P) / elas.k_t])
    scale_f = max(abs(loads.axial_force_N), elas.k_e * abs(x[0]), 1.0)
    scale_m = max(abs(loads.moment_Nm), elas.k_t * abs(x[1]), 1.0)

    def norm(res):
        return math.hypot(res[0] / scale_f, res[1] / scale_m)

    res = np.array(static_residuals(x[0], x[1], geom, elas, loads, P))
    for _ in range(max_iter):
        if abs(res[0]) < tol and abs(res[1]) < tol:
            return float(x[0]), float(x[1])
        J = _residual_jacobian(x[0], x[1], geom, elas, P)
        step = np.linalg.solve(J, -res)
        lam = 1.0
        cur = norm(res)
        while True:
            trial = x + lam * step
            try:
                new_res = np.array(static_residuals(trial[0], trial[1], geom,
                                                    elas, loads, P))
                if norm(new_res) < cur or lam < 1e-3:
                    break
            except (DomainError, SingularityError):
                if lam < 1e-8:
                    raise
            lam *= 0.5
        if np.array_equal(trial, x):
            # no representable progress: accept if already at round-off level
            if norm(res) < 1e-12:
                return float(x[0]), float(x[1])
            break
        x, res = trial, new_res
    raise NoConvergence(
        f"static equilibrium did not converge in {max_iter} iterations "
        f"(residuals {res[0]:.3e} N, {res[1]:.3e} N m)")
