"""Batch front end: ``free-sim <subcommand> --config FILE``.

Each run writes CSV series, SVG figures and a ``summary.json`` into the
output directory. Exit codes: 0 success, 2 configuration error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import identify as ident
from .config import RunConfig, parse_config
from .dynamics import (Loads, simulate_closed_loop, simulate_constant_pressure,
                       static_equilibrium, static_residuals)
from .errors import ConfigError, FreeSimError, NumericalError, ValidationError
from .linear import (LinearizedPlant, classify_stability, default_gain_grid,
                     open_loop_tf, poly_roots, root_locus)
from .report import (IDENTIFY_COLUMNS, LOCUS_COLUMNS, IoError, PlotSpec,
                     emit_csv, emit_svg, locus_rows, read_csv, settle_metrics,
                     time_series_rows)
from .units import PA_PER_PSI

__all__ = ["Artifacts", "run", "main", "SUBCOMMANDS"]

SUBCOMMANDS = {
    "simulate": "constant_pressure",
    "pid": "pid_step",
    "traj": "trajectory",
    "rootlocus": "root_locus",
    "identify": "identify",
    "material": "material_util",
}


@dataclass
class Artifacts:
    csv_paths: list = field(default_factory=list)
    svg_paths: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    summary_path: Path = None


def _t_eval(cfg: RunConfig):
    if cfg.output_dt is None:
        return None
    n = int(math.floor(cfg.t_end / cfg.output_dt + 1e-9))
    t = np.arange(n + 1) * cfg.output_dt
    if t[-1] < cfg.t_end:
        t = np.append(t, cfg.t_end)
    return t


def _spec(cfg, kind, title, **kw):
    return PlotSpec(kind, title, cfg.angle_unit, cfg.pressure_unit, **kw)


def _emit_series(cfg, series, name, title, art):
    if cfg.csv:
        cols, rows = time_series_rows(series)
        art.csv_paths.append(emit_csv(rows, cols, Path(cfg.out_dir) / f"{name}.csv"))
    if cfg.svg:
        art.svg_paths.append(emit_svg(series, _spec(cfg, "time_series", title),
                                      Path(cfg.out_dir) / f"{name}.svg"))


def _final_state(series):
    s = series.final_state()
    return {"s_m": float(s[0]), "phi_rad": float(s[1]),
            "s_dot": float(s[2]), "phi_dot": float(s[3])}


def _run_constant_pressure(cfg, art):
    series = simulate_constant_pressure(
        cfg.geometry, cfg.body, cfg.elastomer, cfg.loads, cfg.pressure_pa,
        cfg.t_end, (cfg.rtol, cfg.atol), cfg.initial_state, _t_eval(cfg))
    fin = series.final_state()
    res = static_residuals(fin[0], fin[1], cfg.geometry, cfg.elastomer,
                           cfg.loads, cfg.pressure_pa)
    summary = {"final_state": _final_state(series),
               "static_residuals": {"force_N": res[0], "moment_Nm": res[1]},
               "solver": dict(series.stats)}
    try:
        s_eq, phi_eq = static_equilibrium(cfg.geometry, cfg.elastomer,
                                          cfg.loads, cfg.pressure_pa)
        summary["static_equilibrium"] = {"s_m": s_eq, "phi_rad": phi_eq}
    except NumericalError as exc:
        summary["static_equilibrium"] = {"error": str(exc)}
    _emit_series(cfg, series, "constant_pressure", "constant pressure", art)
    return summary


def _run_closed_loop(cfg, art, name, title):
    series = simulate_closed_loop(
        cfg.geometry, cfg.body, cfg.elastomer, cfg.loads, cfg.controller,
        cfg.reference, cfg.t_end, (cfg.rtol, cfg.atol), cfg.initial_state,
        _t_eval(cfg))
    period = 2 * math.pi * math.sqrt(cfg.body.end_cap_inertia_kgm2
                                     / cfg.elastomer.k_t)
    metrics = settle_metrics(series, cfg.reference, cfg.band_rad,
                             ripple_period=period if cfg.output_dt else None)
    ref_max = float(np.max(np.abs(series.reference)))
    summary = {"final_state": _final_state(series),
               "segments": metrics,
               "solver": dict(series.stats)}
    if ref_max > 0:
        summary["tracking_rmsd"] = ident.rmsd_displacement(
            series.phi, series.reference, ref_max)
    summary["pressure_saturated_frac"] = float(
        np.mean(series.pressure_Pa >= cfg.controller.p_max))
    _emit_series(cfg, series, name, title, art)
    return summary


def _run_root_locus(cfg, art):
    spec = cfg.root_locus
    plant = LinearizedPlant.from_parts(cfg.geometry, cfg.body, cfg.elastomer)
    tf = open_loop_tf(spec.sweep, cfg.controller, plant, spec.direct_law)
    k_ref = {"kp": cfg.controller.k_p, "ki": cfg.controller.k_i,
             "kd": cfg.controller.k_d}[spec.sweep]
    if spec.gains is not None:
        gains = np.asarray(spec.gains)
    else:
        if not k_ref > 0:
            raise ValidationError(f"controller.k_{spec.sweep[1]}",
                                  "must be positive to center the gain grid")
        gains = default_gain_grid(k_ref, spec.n_gains)
    locus = root_locus(tf, gains)
    verdicts = [classify_stability(row).verdict for row in locus.poles]
    summary = {"sweep": spec.sweep, "c1": plant.c1, "c2": plant.c2,
               "num": list(tf.num), "den": list(tf.den),
               "n_gains": int(gains.size),
               "stable_gain_frac": verdicts.count("stable") / len(verdicts)}
    unstable = [float(k) for k, v in zip(gains, verdicts) if v != "stable"]
    summary["first_non_stable_gain"] = unstable[0] if unstable else None
    if k_ref > 0:
        den = np.asarray(tf.den, dtype=float)
        num = np.concatenate([np.zeros(den.size - len(tf.num)), tf.num])
        poles = poly_roots(den + k_ref * num)
        rep = classify_stability(poles)
        summary["at_configured_gain"] = {
            "gain": k_ref, "verdict": rep.verdict,
            "dominant_pole": [rep.dominant_pole.real, rep.dominant_pole.imag],
            "damping_ratio": rep.damping_ratio,
            "underdamped": rep.underdamped,
            "poles": [[complex(p).real, complex(p).imag] for p in poles]}
    if cfg.csv:
        art.csv_paths.append(emit_csv(locus_rows(locus), LOCUS_COLUMNS,
                                      Path(cfg.out_dir) / "root_locus.csv"))
    if cfg.svg:
        art.svg_paths.append(emit_svg(
            locus, _spec(cfg, "root_locus", f"root locus, {spec.sweep} sweep"),
            Path(cfg.out_dir) / "root_locus.svg"))
    return summary


def _run_identify(cfg, art):
    spec = cfg.identify
    summary = {}
    if spec.samples_csv is not None:
        data = read_csv(spec.samples_csv, IDENTIFY_COLUMNS)
        zero = data[data[:, 0] == 0]
        pressed = data[data[:, 0] != 0]
        out = {"n_samples": int(data.shape[0])}
        if zero.size:
            ax = zero[zero[:, 1] != 0]
            tw = zero[zero[:, 2] != 0]
            if ax.size:
                out["k_e_unpressurized"] = ident.fit_stiffness(ax[:, [1, 3]])
            if tw.size:
                out["k_t_unpressurized"] = ident.fit_stiffness(tw[:, [2, 4]])
        if pressed.size:
            if cfg.geometry is None:
                raise ValidationError("geometry",
                                      "required to back out pressurized samples")
            rows = []
            for P, s, phi, F, M in pressed:
                k_e, k_t = ident.backout_stiffness(cfg.geometry, Loads(F, M),
                                                   P, s, phi)
                rows.append((P, k_e, k_t))
            k_e_avg, k_t_avg = ident.averaged_stiffness(rows)
            out["per_pressure"] = [{"P_pa": r[0], "k_e": r[1], "k_t": r[2]}
                                   for r in rows]
            out["k_e_avg"] = k_e_avg
            out["k_t_avg"] = k_t_avg
        summary["stiffness"] = out
        if cfg.svg:
            x = data[:, 1] * 1000
            art.svg_paths.append(emit_svg(
                (x, {"axial load [N]": data[:, 3]}),
                _spec(cfg, "xy", "static samples", xlabel="elongation [mm]",
                      ylabel="load [N]"),
                Path(cfg.out_dir) / "identify_static.svg"))
    if spec.vibration_csv is not None:
        data = read_csv(spec.vibration_csv, ("t", "x"))
        trace = ident.VibrationTrace(data[:, 0], data[:, 1], spec.channel)
        est = ident.log_decrement_damping(trace, spec.inertia_like)
        summary["damping"] = {"channel": spec.channel, **est._asdict()}
        if cfg.svg:
            art.svg_paths.append(emit_svg(
                (trace.t, {spec.channel: trace.x}),
                _spec(cfg, "xy", f"{spec.channel} free decay",
                      xlabel="time [s]", ylabel="displacement"),
                Path(cfg.out_dir) / "identify_decay.svg"))
    return summary


def _run_material(cfg, art):
    spec = cfg.material
    summary = {}
    out = Path(cfg.out_dir)
    if spec.thin_wall is not None:
        p_max, r, b, E, nu = spec.thin_wall
        p = np.linspace(0.0, p_max, spec.n_points)
        dr = np.array([ident.thin_wall_expansion(pi, r, b, E, nu) for pi in p])
        summary["thin_wall"] = {"p_max_pa": p_max,
                                "expansion_at_p_max_m": float(dr[-1])}
        if cfg.csv:
            art.csv_paths.append(emit_csv(np.column_stack([p, dr]),
                                          ("p_pa", "delta_r_m"),
                                          out / "thin_wall.csv"))
        if cfg.svg:
            px = p / PA_PER_PSI if cfg.pressure_unit == "psi" else p
            art.svg_paths.append(emit_svg(
                (px, {"radial expansion": dr * 1000}),
                _spec(cfg, "xy", "thin-wall radial expansion",
                      xlabel=f"pressure [{cfg.pressure_unit}]",
                      ylabel="expansion [mm]"),
                out / "thin_wall.svg"))
    if spec.ogden is not None:
        mu, alpha, lam_max = spec.ogden
        params = ident.OgdenParams(mu, alpha)
        lam = np.linspace(1.0, lam_max, spec.n_points)
        psi = np.array([ident.ogden_energy(x, x ** -0.5, x ** -0.5, params)
                        for x in lam])
        summary["ogden_uniaxial"] = {"stretch_max": lam_max,
                                     "energy_at_stretch_max_pa": float(psi[-1])}
        if cfg.csv:
            art.csv_paths.append(emit_csv(np.column_stack([lam, psi]),
                                          ("stretch", "energy_pa"),
                                          out / "ogden.csv"))
        if cfg.svg:
            art.svg_paths.append(emit_svg(
                (lam, {"energy density": psi / 1000}),
                _spec(cfg, "xy", "uniaxial Ogden energy", xlabel="stretch",
                      ylabel="energy [kPa]"),
                out / "ogden.svg"))
    return summary


def _clean(obj):
    """JSON-safe copy: NaN and inf become null, numpy scalars become floats."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def run(cfg: RunConfig) -> Artifacts:
    """Execute one configured scenario and write its artifacts."""
    art = Artifacts()
    sc = cfg.scenario
    if sc == "constant_pressure":
        body = _run_constant_pressure(cfg, art)
    elif sc == "pid_step":
        body = _run_closed_loop(cfg, art, "pid_step", "PID rotation control")
    elif sc == "trajectory":
        body = _run_closed_loop(cfg, art, "trajectory", "trajectory following")
    elif sc == "root_locus":
        body = _run_root_locus(cfg, art)
    elif sc == "identify":
        body = _run_identify(cfg, art)
    elif sc == "material_util":
        body = _run_material(cfg, art)
    else:
        raise ValidationError("scenario", f"unknown scenario {sc!r}")
    summary = {"scenario": sc, **body,
               "csv": [p.name for p in art.csv_paths],
               "svg": [p.name for p in art.svg_paths]}
    art.summary = _clean(summary)
    path = Path(cfg.out_dir) / "summary.json"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(art.summary, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    art.summary_path = path
    return art


def _parse_units(text):
    angle = pressure = None
    for tok in text.split(","):
        tok = tok.strip().lower()
        if tok in ("deg", "rad"):
            angle = tok
        elif tok in ("psi", "pa"):
            pressure = tok
        else:
            raise argparse.ArgumentTypeError(f"unknown unit {tok!r}")
    return angle, pressure


def build_parser():
    ap = argparse.ArgumentParser(
        prog="free-sim",
        description="Simulate, control and identify fiber-reinforced "
                    "elastomeric actuators.")
    ap.add_argument("subcommand", choices=sorted(SUBCOMMANDS))
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out-dir", help="output directory (overrides config)")
    ap.add_argument("--csv", action="store_true", help="write CSV output")
    ap.add_argument("--svg", action="store_true", help="write SVG figures")
    ap.add_argument("--units", type=_parse_units, metavar="ANGLE,PRESSURE",
                    help="plot units, e.g. deg,psi or rad,pa")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    scenario = SUBCOMMANDS[args.subcommand]
    try:
        cfg = parse_config(args.config, scenario=scenario)
        if cfg.scenario != scenario:
            raise ValidationError(
                "scenario", f"config is {cfg.scenario!r} but the subcommand "
                            f"{args.subcommand!r} runs {scenario!r}")
        changes = {}
        if args.out_dir:
            changes["out_dir"] = args.out_dir
        if args.csv or args.svg:
            changes["csv"] = args.csv
            changes["svg"] = args.svg
        if args.units:
            angle, pressure = args.units
            if angle:
                changes["angle_unit"] = angle
            if pressure:
                changes["pressure_unit"] = pressure
        cfg = replace(cfg, **changes)
        art = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure in {scenario}: {exc}", file=sys.stderr)
        return 3
    except IoError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    except FreeSimError as exc:
        print(f"{scenario}: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        # malformed input data such as a CSV with missing columns
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2
    for p in art.csv_paths + art.svg_paths + [art.summary_path]:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
