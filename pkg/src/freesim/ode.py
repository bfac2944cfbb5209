"""Embedded Runge-Kutta 5(4) integrator (Dormand-Prince) with PI step control.

The method coefficients and the 4th order continuous extension are the
standard ones (Hairer, Norsett & Wanner, *Solving ODEs I*, and Shampine's
dense output as used by ode45). Step size control follows Hairer's DOPRI5:
a proportional-integral controller on the scaled RMS error estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import StepFailure

__all__ = ["OdeResult", "solve_ode"]

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# B - B_hat (5th minus embedded 4th order weights)
E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200,
              22 / 525, -1 / 40])
# dense output: y(t + th*h) = y + h * K.T @ (P @ [th, th^2, th^3, th^4])
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608,
     -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933,
     87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304,
     -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408,
     701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883,
     -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
FAC_MIN = 0.2   # largest allowed step decrease factor is 1/FAC_MIN
FAC_MAX = 10.0
BETA = 0.04     # integral gain of the PI controller
EXPO = 0.2 - 0.75 * BETA


@dataclass
class OdeResult:
    """Solution samples. ``y`` has shape ``(len(t), n)``; ``y_final`` is the
    state reached at the end of the span."""

    t: np.ndarray
    y: np.ndarray
    y_final: np.ndarray = None
    nfev: int = 0
    n_accepted: int = 0
    n_rejected: int = 0


def _rms_norm(err, scale):
    return math.sqrt(float(np.mean((err / scale) ** 2)))


def _initial_step(fun, t0, y0, f0, direction, rtol, atol):
    scale = atol + np.abs(y0) * rtol
    d0 = _rms_norm(y0, scale)
    d1 = _rms_norm(f0, scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + direction * h0 * f0
    f1 = fun(t0 + direction * h0, y1)
    d2 = _rms_norm(f1 - f0, scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def solve_ode(fun, t_span, y0, rtol=1e-6, atol=1e-6, t_eval=None,
              max_step=math.inf, first_step=None, max_steps=1_000_000):
    """Integrate ``y' = fun(t, y)`` over ``t_span``.

    Args:
        fun: Callable returning the derivative as a sequence of floats.
        t_span: ``(t0, t_end)``, with ``t_end > t0``.
        y0: Initial state.
        rtol, atol: Local error tolerances (scalar or per component).
        t_eval: Optional sorted times in ``[t0, t_end]``. When given the
            result holds dense-output samples at exactly those times;
            otherwise it holds every accepted step, starting at ``t0``.
        max_step: Upper bound on the step size.

    Raises:
        StepFailure: if the step size underflows; ``err.t`` is the time
            where the integration stalled.
    """
    t0, t_end = map(float, t_span)
    if not (math.isfinite(t0) and math.isfinite(t_end)) or t_end <= t0:
        raise ValueError(f"t_span must be finite and increasing, got {t_span!r}")
    if np.any(np.asarray(rtol) <= 0) or np.any(np.asarray(atol) <= 0):
        raise ValueError("tolerances must be positive")
    rtol = np.asarray(rtol, dtype=float)
    atol = np.asarray(atol, dtype=float)

    def f(t, y):
        return np.asarray(fun(t, y), dtype=float)

    y = np.array(y0, dtype=float)
    n = y.size
    t = t0
    k = np.empty((7, n))
    k[0] = f(t, y)
    nfev = 1

    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        if t_eval.size and (t_eval[0] < t0 or t_eval[-1] > t_end
                            or np.any(np.diff(t_eval) < 0)):
            raise ValueError("t_eval must be sorted and inside t_span")
        out_t, out_y = [], []
        i_eval = 0
        while i_eval < t_eval.size and t_eval[i_eval] == t0:
            out_t.append(t0)
            out_y.append(y.copy())
            i_eval += 1
    else:
        out_t, out_y = [t0], [y.copy()]

    if first_step is None:
        h = _initial_step(f, t0, y, k[0], 1.0, float(np.max(rtol)),
                          float(np.max(atol)))
        nfev += 1
    else:
        h = float(first_step)
    h = min(h, max_step, t_end - t0)

    fac_old = 1e-4
    n_acc = n_rej = 0
    last_rejected = False
    steps = 0
    while t < t_end:
        steps += 1
        if steps > max_steps:
            raise StepFailure(f"maximum number of steps exceeded at t={t!r}", t)
        h_min = 16 * np.finfo(float).eps * max(abs(t), 1.0)
        if h < h_min:
            raise StepFailure(f"step size underflow at t={t!r}", t)
        if t + h >= t_end or t + 1.01 * h > t_end:
            h = t_end - t
            t_new = t_end
        else:
            t_new = t + h

        for i in range(1, 7):
            dy = np.dot(A[i], k[:i]) * h
            k[i] = f(t + C[i] * h, y + dy)
        nfev += 6
        y_new = y + h * np.dot(B, k)
        # k[6] was evaluated at y_new: FSAL
        err = h * np.dot(E, k)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = _rms_norm(err, scale)

        if not math.isfinite(err_norm):
            h *= FAC_MIN
            last_rejected = True
            n_rej += 1
            continue

        fac11 = err_norm ** EXPO if err_norm > 0 else 0.0
        if err_norm <= 1.0:
            fac = fac11 / fac_old ** BETA
            fac = min(1 / FAC_MIN, max(1 / FAC_MAX, fac / SAFETY))
            h_next = h / fac
            if last_rejected:
                h_next = min(h_next, h)
            fac_old = max(err_norm, 1e-4)

            if t_eval is not None:
                while i_eval < t_eval.size and t_eval[i_eval] <= t_new:
                    th = (t_eval[i_eval] - t) / h
                    q = P @ np.array([th, th * th, th ** 3, th ** 4])
                    out_t.append(float(t_eval[i_eval]))
                    out_y.append(y + h * (k.T @ q))
                    i_eval += 1
            t, y = t_new, y_new
            k[0] = k[6]
            if t_eval is None:
                out_t.append(t)
                out_y.append(y.copy())
            n_acc += 1
            last_rejected = False
            h = min(h_next, max_step)
        else:
            h = h / min(1 / FAC_MIN, fac11 / SAFETY)
            last_rejected = True
            n_rej += 1

    if t_eval is not None and i_eval < t_eval.size:
        # t_eval points equal to t_end after the final step
        while i_eval < t_eval.size:
            out_t.append(float(t_eval[i_eval]))
            out_y.append(y.copy())
            i_eval += 1

    y_arr = np.array(out_y).reshape(len(out_y), n)
    return OdeResult(np.array(out_t), y_arr, y, nfev, n_acc, n_rej)
