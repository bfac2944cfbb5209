"""PID pressure law and rotation references.

Every reference is a stateless object with ``sample(t)`` returning the desired
angle, its rate and its running integral in closed form, plus ``breakpoints``
listing the times where the reference (or its derivative) switches formula.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .errors import InvalidDuration
from .units import PA_PER_PSI

__all__ = [
    "PidGains",
    "ReferenceSample",
    "CubicTrajectory",
    "StepSchedule",
    "ChainedTrajectory",
    "ConstantReference",
    "pid_pressure",
    "cubic_coefficients",
    "trajectory_sample",
    "schedule_sample",
    "chained_trajectory",
]

DEFAULT_P_MAX = 10.0 * PA_PER_PSI


@dataclass(frozen=True)
class PidGains:
    """Controller gains (Pa/rad, Pa/(rad s), Pa s/rad) and pressure ceiling."""

    k_p: float = 0.0
    k_i: float = 0.0
    k_d: float = 0.0
    p_max: float = DEFAULT_P_MAX

    def __post_init__(self):
        for name in ("k_p", "k_i", "k_d"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
        if not (self.p_max > 0 and math.isfinite(self.p_max)):
            raise ValueError(f"p_max must be positive, got {self.p_max!r}")


class ReferenceSample(NamedTuple):
    phi: float
    phi_dot: float
    phi_int: float


def pid_pressure(g: PidGains, ref: ReferenceSample, phi, phi_dot, err_int,
                 winding_angle):
    """Commanded pressure for the current state.

    ``err_int`` is the running integral of the measured angle; the integral
    term compares it with the reference's closed-form integral. The command
    is negated for positive winding angles (whose rotation under pressure is
    negative) and clamped to ``[0, p_max]``.
    """
    u = (g.k_p * (ref.phi - phi) + g.k_d * (ref.phi_dot - phi_dot)
         + g.k_i * (ref.phi_int - err_int))
    if winding_angle > 0:
        u = -u
    if u <= 0.0:
        return 0.0
    return min(u, g.p_max)


@dataclass(frozen=True)
class ConstantReference:
    """Fixed setpoint from t = 0 on."""

    phi: float

    breakpoints = ()

    def sample(self, t):
        return ReferenceSample(self.phi, 0.0, self.phi * t)

    @property
    def duration(self):
        return 0.0


@dataclass(frozen=True)
class CubicTrajectory:
    """Rest-to-rest cubic from ``phi_0`` to ``phi_f`` over ``t_f`` seconds,
    held at ``phi_f`` afterwards."""

    phi_0: float
    phi_f: float
    t_f: float

    def __post_init__(self):
        if not (self.t_f > 0 and math.isfinite(self.t_f)):
            raise InvalidDuration(f"t_f must be positive, got {self.t_f!r}")

    @property
    def coefficients(self):
        """``(a0, a1, a2, a3)`` of ``a0 + a1 t + a2 t^2 + a3 t^3``."""
        d = self.phi_f - self.phi_0
        return (self.phi_0, 0.0, 3.0 * d / self.t_f ** 2,
                -2.0 * d / self.t_f ** 3)

    @property
    def breakpoints(self):
        return (self.t_f,)

    @property
    def duration(self):
        return self.t_f

    def sample(self, t):
        return trajectory_sample(self, t)


def cubic_coefficients(phi_0, phi_f, t_f) -> CubicTrajectory:
    return CubicTrajectory(phi_0, phi_f, t_f)


def _cubic_integral(phi_0, d, t_f, t):
    # integral of phi_0 + 3d t^2/t_f^2 - 2d t^3/t_f^3 from 0 to t
    return phi_0 * t + d * (t ** 3 / t_f ** 2 - t ** 4 / (2.0 * t_f ** 3))


def trajectory_sample(traj: CubicTrajectory, t) -> ReferenceSample:
    p0, pf, tf = traj.phi_0, traj.phi_f, traj.t_f
    d = pf - p0
    if t <= tf:
        tau = t / tf
        phi = p0 + d * tau * tau * (3.0 - 2.0 * tau)
        phi_dot = 6.0 * d * tau * (1.0 - tau) / tf
        return ReferenceSample(phi, phi_dot, _cubic_integral(p0, d, tf, t))
    return ReferenceSample(pf, 0.0,
                           _cubic_integral(p0, d, tf, tf) + pf * (t - tf))


@dataclass(frozen=True)
class StepSchedule:
    """Piecewise-constant setpoints: ``steps`` is ``((angle, duration), ...)``.

    The last setpoint is held after the schedule ends.
    """

    steps: tuple

    def __post_init__(self):
        if not self.steps:
            raise ValueError("a step schedule needs at least one step")
        steps = tuple((float(a), float(d)) for a, d in self.steps)
        for _, d in steps:
            if not (d > 0 and math.isfinite(d)):
                raise InvalidDuration(f"step duration must be positive, got {d!r}")
        object.__setattr__(self, "steps", steps)
        starts, areas = [0.0], [0.0]
        for a, d in steps:
            starts.append(starts[-1] + d)
            areas.append(areas[-1] + a * d)
        object.__setattr__(self, "_starts", tuple(starts))
        object.__setattr__(self, "_areas", tuple(areas))

    @property
    def breakpoints(self):
        return self._starts[1:-1]

    @property
    def duration(self):
        return self._starts[-1]

    def sample(self, t):
        return schedule_sample(self, t)


def schedule_sample(sched: StepSchedule, t) -> ReferenceSample:
    # a boundary time belongs to the following step
    i = min(bisect.bisect_right(sched._starts, t) - 1, len(sched.steps) - 1)
    i = max(i, 0)
    angle = sched.steps[i][0]
    return ReferenceSample(angle, 0.0,
                           sched._areas[i] + angle * (t - sched._starts[i]))


@dataclass(frozen=True)
class _Segment:
    start: float
    phi_0: float
    phi_f: float
    move: float     # cubic duration, 0 for a pure hold
    end: float
    int_start: float


@dataclass(frozen=True)
class ChainedTrajectory:
    """Cubic moves between waypoints separated by dwells.

    ``waypoints`` is ``((target, move_duration, dwell), ...)``; each move
    starts from the previous target (``phi_start`` for the first one).
    """

    waypoints: tuple
    phi_start: float = 0.0

    def __post_init__(self):
        if not self.waypoints:
            raise ValueError("a chained trajectory needs at least one waypoint")
        wps = tuple((float(a), float(td), float(dw))
                    for a, td, dw in self.waypoints)
        segments = []
        t = 0.0
        integ = 0.0
        prev = float(self.phi_start)
        for target, t_d, dwell in wps:
            if not (t_d > 0 and math.isfinite(t_d)):
                raise InvalidDuration(f"move duration must be positive, got {t_d!r}")
            if not (dwell >= 0 and math.isfinite(dwell)):
                raise InvalidDuration(f"dwell must be >= 0, got {dwell!r}")
            end = t + t_d + dwell
            segments.append(_Segment(t, prev, target, t_d, end, integ))
            integ += (_cubic_integral(prev, target - prev, t_d, t_d)
                      + target * dwell)
            prev = target
            t = end
        object.__setattr__(self, "waypoints", wps)
        object.__setattr__(self, "_segments", tuple(segments))
        object.__setattr__(self, "_starts", tuple(s.start for s in segments))

    @property
    def duration(self):
        return self._segments[-1].end

    @property
    def breakpoints(self):
        pts = []
        for seg in self._segments:
            if seg.start > 0:
                pts.append(seg.start)
            if seg.end > seg.start + seg.move:
                pts.append(seg.start + seg.move)
        return tuple(pts)

    def sample(self, t):
        i = max(bisect.bisect_right(self._starts, t) - 1, 0)
        seg = self._segments[i]
        tau = t - seg.start
        d = seg.phi_f - seg.phi_0
        if tau <= seg.move:
            x = tau / seg.move
            return ReferenceSample(
                seg.phi_0 + d * x * x * (3.0 - 2.0 * x),
                6.0 * d * x * (1.0 - x) / seg.move,
                seg.int_start + _cubic_integral(seg.phi_0, d, seg.move, tau))
        return ReferenceSample(
            seg.phi_f, 0.0,
            seg.int_start + _cubic_integral(seg.phi_0, d, seg.move, seg.move)
            + seg.phi_f * (tau - seg.move))


def chained_trajectory(waypoints: Sequence, phi_start=0.0) -> ChainedTrajectory:
    return ChainedTrajectory(tuple(waypoints), phi_start)
