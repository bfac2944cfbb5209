"""CSV and SVG emission plus settle metrics for control runs."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import FreeSimError  # noqa: E402
from .units import PA_PER_PSI  # noqa: E402

__all__ = [
    "TIME_SERIES_COLUMNS",
    "LOCUS_COLUMNS",
    "IDENTIFY_COLUMNS",
    "IoError",
    "PlotSpec",
    "format_value",
    "emit_csv",
    "time_series_rows",
    "locus_rows",
    "read_csv",
    "emit_svg",
    "settle_metrics",
]

TIME_SERIES_COLUMNS = ("t", "s_m", "phi_rad", "sdot", "phidot", "P_pa",
                       "gamma_rad", "r_m")
LOCUS_COLUMNS = ("K", "branch", "re", "im")
IDENTIFY_COLUMNS = ("P_pa", "s_m", "phi_rad", "F_N", "M_Nm")


class IoError(FreeSimError, OSError):
    """Output could not be written or input could not be read."""


def format_value(v):
    """Fixed 9-significant-digit rendering used by every CSV writer."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if v == 0:
        return "0"
    return f"{v:.9g}"


def emit_csv(rows, columns, path):
    """Write ``rows`` under a header of ``columns``; returns the path.

    Every row must have one value per column.
    """
    path = Path(path)
    columns = tuple(columns)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                if len(row) != len(columns):
                    raise ValueError(
                        f"row has {len(row)} values, schema has {len(columns)}")
                w.writerow([format_value(v) for v in row])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def time_series_rows(series, with_reference=None):
    """Rows in ``TIME_SERIES_COLUMNS`` order, plus ``phi_d_rad`` when the
    series carries a reference. Returns ``(columns, rows)``."""
    if with_reference is None:
        with_reference = series.reference is not None
    cols = TIME_SERIES_COLUMNS + (("phi_d_rad",) if with_reference else ())
    rows = []
    for i in range(len(series.t)):
        st = series.states[i]
        row = [series.t[i], st[0], st[1], st[2], st[3], series.pressure_Pa[i],
               series.gamma[i], series.radius[i]]
        if with_reference:
            row.append(series.reference[i])
        rows.append(row)
    return cols, rows


def locus_rows(locus):
    rows = []
    for j in range(locus.n_branches):
        for k, z in zip(locus.gains, locus.branch(j)):
            rows.append([k, j, z.real, z.imag])
    return rows


def read_csv(path, columns):
    """Read a CSV whose header contains ``columns``; returns a float array
    with the columns in the requested order."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            missing = [c for c in columns if c not in header]
            if missing:
                raise ValueError(f"{path}: missing columns {missing}")
            idx = [header.index(c) for c in columns]
            data = []
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(header):
                    raise ValueError(f"{path}:{lineno}: expected {len(header)} values")
                data.append([float(row[i]) for i in idx])
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except StopIteration:
        raise ValueError(f"{path}: empty file") from None
    return np.array(data, dtype=float).reshape(-1, len(columns))


@dataclass(frozen=True)
class PlotSpec:
    kind: str = "time_series"       # time_series | root_locus | xy
    title: str = ""
    angle_unit: str = "deg"
    pressure_unit: str = "psi"
    xlabel: str = ""
    ylabel: str = ""


def _angle(values, unit):
    return np.degrees(values) if unit == "deg" else np.asarray(values)


def _pressure(values, unit):
    return np.asarray(values) / PA_PER_PSI if unit == "psi" else np.asarray(values)


def _save(fig, path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path


def _plot_time_series(series, spec):
    au, pu = spec.angle_unit, spec.pressure_unit
    fig, axes = plt.subplots(2, 3, figsize=(12, 6))
    t = series.t
    ax = axes[0, 0]
    ax.plot(t, _pressure(series.pressure_Pa, pu))
    ax.set_ylabel(f"pressure [{pu}]")
    ax = axes[0, 1]
    ax.plot(t, series.s * 1000)
    ax.set_ylabel("elongation [mm]")
    ax = axes[0, 2]
    ax.plot(t, _angle(series.gamma, au))
    ax.set_ylabel(f"fiber angle [{au}]")
    ax = plt.subplot2grid((2, 3), (1, 0), colspan=2, fig=fig)
    axes[1, 0].remove()
    axes[1, 1].remove()
    ax.plot(t, _angle(series.phi, au), label="response")
    if series.reference is not None:
        ax.plot(t, _angle(series.reference, au), "r", lw=0.8, label="setpoint")
        ax.legend(loc="best")
    ax.set_ylabel(f"rotation [{au}]")
    ax.set_xlabel("time [s]")
    ax = axes[1, 2]
    ax.plot(t, series.radius * 1000)
    ax.set_ylabel("radius [mm]")
    ax.set_xlabel("time [s]")
    for a in fig.axes:
        a.grid(True)
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    return fig


def _plot_root_locus(locus, spec):
    fig, ax = plt.subplots(figsize=(7, 5))
    for j in range(locus.n_branches):
        z = locus.branch(j)
        ax.plot(z.real, z.imag, lw=1.2)
        ax.plot(z.real[0], z.imag[0], "x", color="k")
    ax.axvline(0.0, color="0.5", lw=0.6)
    ax.axhline(0.0, color="0.5", lw=0.6)
    ax.set_xlabel("real axis [1/s]")
    ax.set_ylabel("imaginary axis [1/s]")
    ax.grid(True)
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    return fig


def _plot_xy(data, spec):
    x, ys = data
    fig, ax = plt.subplots(figsize=(7, 5))
    for label, y in ys.items():
        ax.plot(x, y, label=label)
    if len(ys) > 1:
        ax.legend(loc="best")
    ax.set_xlabel(spec.xlabel)
    ax.set_ylabel(spec.ylabel)
    ax.grid(True)
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    return fig


def emit_svg(data, spec: PlotSpec, path):
    """Render ``data`` to an SVG file and return the path.

    ``data`` is a TimeSeries for ``time_series``, a RootLocus for
    ``root_locus`` and ``(x, {label: y})`` for ``xy``.
    """
    with matplotlib.rc_context({"svg.hashsalt": "freesim",
                                "svg.fonttype": "path"}):
        if spec.kind == "time_series":
            fig = _plot_time_series(data, spec)
        elif spec.kind == "root_locus":
            fig = _plot_root_locus(data, spec)
        elif spec.kind == "xy":
            fig = _plot_xy(data, spec)
        else:
            raise ValueError(f"unknown plot kind {spec.kind!r}")
        return _save(fig, path)


def _segment_bounds(reference, t_end):
    pts = [0.0]
    steps = getattr(reference, "steps", None)
    if steps is not None:
        acc = 0.0
        for _, d in steps:
            acc += d
            pts.append(acc)
    else:
        segs = getattr(reference, "_segments", None)
        if segs is not None:
            pts += [s.end for s in segs]
        else:
            pts.append(getattr(reference, "duration", 0.0))
    pts = [p for p in pts if p < t_end] + [t_end]
    return [(a, b) for a, b in zip(pts[:-1], pts[1:]) if b > a]


def settle_metrics(series, reference, band=math.radians(2.0),
                   ripple_period=None):
    """Per-segment tracking metrics of a closed-loop run.

    For each reference segment: the time (from segment start) after which
    the error stays inside ``band``, the overshoot past the final setpoint as
    a fraction of the step size, the terminal error, and the post-settle
    ripple. Ripple is the peak-to-peak of the error minus its moving average
    over ``ripple_period`` seconds (high-pass), evaluated after settling, so
    smooth approaches do not count and oscillations do. Series should be
    uniformly sampled for the ripple figure to be meaningful.
    """
    t = series.t
    err = series.phi - series.reference
    out = []
    prev_target = series.phi[0]
    for a, b in _segment_bounds(reference, float(t[-1])):
        last = b >= t[-1]
        m = (t >= a) & ((t <= b) if last else (t < b))
        if m.sum() < 2:
            continue
        ts, e = t[m], err[m]
        target = series.reference[m][-1]
        outside = np.flatnonzero(np.abs(e) > band)
        if outside.size == 0:
            settle = 0.0
            j0 = 0
        elif outside[-1] + 1 < e.size:
            j0 = outside[-1] + 1
            settle = float(ts[j0] - a)
        else:
            j0 = e.size
            settle = math.nan
        step = target - prev_target
        resp = series.phi[m]
        if step != 0:
            beyond = (resp - target) * math.copysign(1.0, step)
            overshoot = max(float(beyond.max()), 0.0) / abs(step)
        else:
            overshoot = 0.0
        ripple = math.nan
        if ripple_period and j0 < e.size:
            dt = float(np.median(np.diff(ts)))
            w = max(int(round(ripple_period / dt)) | 1, 3)
            if e.size > w:
                ma = np.convolve(e, np.ones(w) / w, mode="valid")
                hp = e[w // 2:e.size - w // 2] - ma
                start = max(j0 - w // 2, 0)
                if start < hp.size:
                    ripple = float(np.ptp(hp[start:]))
        out.append({"t_start": float(a), "t_end": float(b),
                     "setpoint_rad": float(target),
                     "settle_time_s": settle,
                     "overshoot_frac": overshoot,
                     "final_error_rad": float(e[-1]),
                     "ripple_rad": ripple})
        prev_target = target
    return out
