"""JSON run configuration: parsing, validation and SI round-tripping.

Quantities carrying a unit take a suffixed key: ``_deg`` or ``_rad`` for
angles and ``_psi`` or ``_pa`` for pressures. Everything is converted to SI
on the way in; ``write_config`` writes SI keys only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .control import (DEFAULT_P_MAX, ChainedTrajectory, ConstantReference,
                      CubicTrajectory, PidGains, StepSchedule)
from .dynamics import BodyParams, Loads, State
from .errors import ParseError, ValidationError
from .geometry import ElastomerParams, Geometry
from .units import GRAVITY, PA_PER_PSI

__all__ = [
    "SCENARIOS",
    "RootLocusSpec",
    "IdentifySpec",
    "MaterialSpec",
    "RunConfig",
    "parse_config",
    "config_from_dict",
    "config_to_dict",
    "write_config",
]

SCENARIOS = ("constant_pressure", "pid_step", "trajectory", "root_locus",
             "identify", "material_util")

_REQUIRED = {
    "constant_pressure": ("geometry", "body", "elastomer", "pressure", "t_end"),
    "pid_step": ("geometry", "body", "elastomer", "controller", "reference"),
    "trajectory": ("geometry", "body", "elastomer", "controller", "reference"),
    "root_locus": ("geometry", "body", "elastomer", "controller", "root_locus"),
    "identify": ("identify",),
    "material_util": ("material",),
}


@dataclass(frozen=True)
class RootLocusSpec:
    sweep: str = "kp"
    gains: Optional[tuple] = None     # explicit grid; else log grid about k_ref
    n_gains: int = 200
    direct_law: bool = False


@dataclass(frozen=True)
class IdentifySpec:
    samples_csv: Optional[str] = None
    vibration_csv: Optional[str] = None
    channel: str = "axial"
    inertia_like: Optional[float] = None


@dataclass(frozen=True)
class MaterialSpec:
    thin_wall: Optional[tuple] = None   # (p_max_pa, r_m, b_m, E_pa, nu)
    ogden: Optional[tuple] = None       # (mu_pa, alpha, stretch_max)
    n_points: int = 50


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    geometry: Optional[Geometry] = None
    body: Optional[BodyParams] = None
    elastomer: Optional[ElastomerParams] = None
    loads: Loads = Loads()
    pressure_pa: Optional[float] = None
    controller: Optional[PidGains] = None
    reference: object = None
    t_end: Optional[float] = None
    rtol: float = 1e-6
    atol: float = 1e-6
    output_dt: Optional[float] = None
    initial_state: State = State()
    band_rad: float = math.radians(2.0)
    root_locus: Optional[RootLocusSpec] = None
    identify: Optional[IdentifySpec] = None
    material: Optional[MaterialSpec] = None
    angle_unit: str = "deg"
    pressure_unit: str = "psi"
    out_dir: str = "out"
    csv: bool = True
    svg: bool = True


# -- reading helpers --------------------------------------------------------

def _section(d, name, required=False):
    v = d.get(name)
    if v is None:
        if required:
            raise ValidationError(name, "section is required")
        return None
    if not isinstance(v, dict):
        raise ValidationError(name, "must be an object")
    return v


def _num(d, key, where, default=None, required=True):
    if key not in d:
        if required and default is None:
            raise ValidationError(f"{where}.{key}", "is required")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(f"{where}.{key}", f"must be a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ValidationError(f"{where}.{key}", "must be finite")
    return v


def _unit(d, base, where, kind, required=True, default=None):
    """Read ``base_deg``/``base_rad`` or ``base_psi``/``base_pa`` as SI."""
    if kind == "angle":
        options = (("_rad", 1.0), ("_deg", math.pi / 180.0))
    else:
        options = (("_pa", 1.0), ("_psi", PA_PER_PSI))
    found = [(sfx, f) for sfx, f in options if base + sfx in d]
    if len(found) > 1:
        raise ValidationError(f"{where}.{base}", "given in two units")
    if not found:
        if required:
            raise ValidationError(f"{where}.{base}", "is required")
        return default
    sfx, f = found[0]
    return _num(d, base + sfx, where) * f


def _unit_list(d, base, where, kind, width, angle_cols):
    scale = {"_rad": 1.0, "_deg": math.pi / 180.0} if kind == "angle" else {}
    found = [s for s in scale if base + s in d]
    if len(found) != 1:
        raise ValidationError(f"{where}.{base}",
                              "give exactly one of _deg or _rad")
    key = base + found[0]
    rows = d[key]
    if not isinstance(rows, list) or not rows:
        raise ValidationError(f"{where}.{key}", "must be a nonempty list")
    out = []
    for row in rows:
        if (not isinstance(row, list) or len(row) != width
                or any(isinstance(x, bool) or not isinstance(x, (int, float))
                       for x in row)):
            raise ValidationError(f"{where}.{key}",
                                  f"entries must be lists of {width} numbers")
        out.append(tuple(float(x) * (scale[found[0]] if i in angle_cols else 1.0)
                         for i, x in enumerate(row)))
    return tuple(out)


def _wrap(where, fn, *args):
    try:
        return fn(*args)
    except ValidationError:
        raise
    except (ValueError, ZeroDivisionError) as exc:
        raise ValidationError(where, str(exc)) from exc


def _geometry(d):
    sec = _section(d, "geometry")
    if sec is None:
        return None
    gamma = _unit(sec, "winding_angle", "geometry", "angle")
    if gamma == 0:
        raise ValidationError("geometry.winding_angle",
                              "must be nonzero (cot is undefined at 0)")
    return _wrap("geometry", Geometry, gamma,
                 _num(sec, "length_m", "geometry"),
                 _num(sec, "radius_m", "geometry"))


def _body(d, geom):
    sec = _section(d, "body")
    if sec is None:
        return None
    m = _num(sec, "end_cap_mass_kg", "body")
    inertia = _num(sec, "end_cap_inertia_kgm2", "body", required=False)
    if inertia is None:
        if geom is None:
            raise ValidationError("body.end_cap_inertia_kgm2",
                                  "required when no geometry is given")
        return _wrap("body", BodyParams.thin_ring, m, geom.radius_m)
    return _wrap("body", BodyParams, m, inertia)


def _elastomer(d):
    sec = _section(d, "elastomer")
    if sec is None:
        return None
    return _wrap("elastomer", ElastomerParams,
                 *(_num(sec, k, "elastomer") for k in ("k_e", "k_t", "c_e", "c_t")))


def _loads(d, body):
    sec = _section(d, "loads")
    if sec is None:
        return Loads()
    f = _num(sec, "axial_force_N", "loads", default=0.0, required=False)
    m = _num(sec, "moment_Nm", "loads", default=0.0, required=False)
    grav = sec.get("gravity", False)
    if not isinstance(grav, bool):
        raise ValidationError("loads.gravity", "must be true or false")
    if grav:
        if body is None:
            raise ValidationError("loads.gravity", "needs a body section")
        f += body.end_cap_mass_kg * GRAVITY
    return _wrap("loads", Loads, f, m)


def _controller(d):
    sec = _section(d, "controller")
    if sec is None:
        return None
    p_max = _unit(sec, "p_max", "controller", "pressure", required=False,
                  default=DEFAULT_P_MAX)
    return _wrap("controller", PidGains,
                 _num(sec, "k_p", "controller", default=0.0, required=False),
                 _num(sec, "k_i", "controller", default=0.0, required=False),
                 _num(sec, "k_d", "controller", default=0.0, required=False),
                 p_max)


def _reference(d):
    sec = _section(d, "reference")
    if sec is None:
        return None
    kind = sec.get("type")
    if kind == "constant":
        return ConstantReference(_unit(sec, "phi", "reference", "angle"))
    if kind == "steps":
        steps = _unit_list(sec, "steps", "reference", "angle", 2, (0,))
        return _wrap("reference", StepSchedule, steps)
    if kind == "cubic":
        return _wrap("reference", CubicTrajectory,
                     _unit(sec, "phi_0", "reference", "angle"),
                     _unit(sec, "phi_f", "reference", "angle"),
                     _num(sec, "t_f", "reference"))
    if kind == "chained":
        wps = _unit_list(sec, "waypoints", "reference", "angle", 3, (0,))
        start = _unit(sec, "phi_start", "reference", "angle", required=False,
                      default=0.0)
        return _wrap("reference", ChainedTrajectory, wps, start)
    raise ValidationError("reference.type",
                          "must be constant, steps, cubic or chained")


def _root_locus(d):
    sec = _section(d, "root_locus")
    if sec is None:
        return None
    sweep = sec.get("sweep", "kp")
    if sweep not in ("kp", "ki", "kd"):
        raise ValidationError("root_locus.sweep", "must be kp, ki or kd")
    gains = sec.get("gains")
    if gains is not None:
        if (not isinstance(gains, list) or not gains
                or any(isinstance(g, bool) or not isinstance(g, (int, float))
                       for g in gains)):
            raise ValidationError("root_locus.gains", "must be a list of numbers")
        gains = tuple(float(g) for g in gains)
        if any(g < 0 for g in gains) or any(b <= a for a, b in zip(gains, gains[1:])):
            raise ValidationError("root_locus.gains",
                                  "must be non-negative and increasing")
    n = sec.get("n_gains", 200)
    if not isinstance(n, int) or isinstance(n, bool) or n < 2:
        raise ValidationError("root_locus.n_gains", "must be an integer >= 2")
    direct = sec.get("direct_law", False)
    if not isinstance(direct, bool):
        raise ValidationError("root_locus.direct_law", "must be true or false")
    return RootLocusSpec(sweep, gains, n, direct)


def _identify(d):
    sec = _section(d, "identify")
    if sec is None:
        return None
    samples, vib = sec.get("samples_csv"), sec.get("vibration_csv")
    for k, v in (("samples_csv", samples), ("vibration_csv", vib)):
        if v is not None and not isinstance(v, str):
            raise ValidationError(f"identify.{k}", "must be a path string")
    if samples is None and vib is None:
        raise ValidationError("identify", "give samples_csv or vibration_csv")
    channel = sec.get("channel", "axial")
    if channel not in ("axial", "torsional"):
        raise ValidationError("identify.channel", "must be axial or torsional")
    inertia = _num(sec, "inertia_like", "identify", required=False)
    if vib is not None and inertia is None:
        raise ValidationError("identify.inertia_like",
                              "required with a vibration trace")
    return IdentifySpec(samples, vib, channel, inertia)


def _material(d):
    sec = _section(d, "material")
    if sec is None:
        return None
    tw = sec.get("thin_wall")
    og = sec.get("ogden")
    thin = ogden = None
    if tw is not None:
        if not isinstance(tw, dict):
            raise ValidationError("material.thin_wall", "must be an object")
        w = "material.thin_wall"
        thin = (_unit(tw, "p_max", w, "pressure"), _num(tw, "r_m", w),
                _num(tw, "b_m", w), _num(tw, "E_pa", w), _num(tw, "nu", w))
        if not (thin[2] > 0 and thin[3] > 0):
            raise ValidationError(w, "b_m and E_pa must be positive")
    if og is not None:
        if not isinstance(og, dict):
            raise ValidationError("material.ogden", "must be an object")
        w = "material.ogden"
        ogden = (_num(og, "mu_pa", w), _num(og, "alpha", w),
                 _num(og, "stretch_max", w))
        if not (ogden[0] > 0 and ogden[1] != 0 and ogden[2] > 1):
            raise ValidationError(w, "need mu_pa > 0, alpha != 0, stretch_max > 1")
    if thin is None and ogden is None:
        raise ValidationError("material", "give thin_wall or ogden")
    n = sec.get("n_points", 50)
    if not isinstance(n, int) or isinstance(n, bool) or n < 2:
        raise ValidationError("material.n_points", "must be an integer >= 2")
    return MaterialSpec(thin, ogden, n)


def config_from_dict(d) -> RunConfig:
    """Validate a decoded JSON document and build a RunConfig."""
    if not isinstance(d, dict):
        raise ValidationError("config", "top level must be an object")
    scenario = d.get("scenario")
    if scenario not in SCENARIOS:
        raise ValidationError("scenario", f"must be one of {', '.join(SCENARIOS)}")
    # report absent sections before any section that depends on them
    for name in _REQUIRED[scenario]:
        if name in ("pressure", "t_end"):
            continue
        if d.get(name) is None:
            raise ValidationError(name, f"required for scenario {scenario}")

    geom = _geometry(d)
    body = _body(d, geom)
    sim = _section(d, "simulation") or {}
    units = _section(d, "units") or {}
    out = _section(d, "output") or {}

    angle_unit = units.get("angle", "deg")
    pressure_unit = units.get("pressure", "psi")
    if angle_unit not in ("deg", "rad"):
        raise ValidationError("units.angle", "must be deg or rad")
    if pressure_unit not in ("psi", "pa"):
        raise ValidationError("units.pressure", "must be psi or pa")

    init = _section(d, "initial_state") or {}
    state0 = State(_num(init, "s_m", "initial_state", 0.0, False),
                   _unit(init, "phi", "initial_state", "angle", False, 0.0),
                   _num(init, "s_dot", "initial_state", 0.0, False),
                   _unit(init, "phi_dot", "initial_state", "angle", False, 0.0),
                   _num(init, "err_int", "initial_state", 0.0, False))

    cfg = dict(
        scenario=scenario,
        geometry=geom,
        body=body,
        elastomer=_elastomer(d),
        loads=_loads(d, body),
        pressure_pa=_unit(d, "pressure", "config", "pressure", required=False),
        controller=_controller(d),
        reference=_reference(d),
        t_end=_num(sim, "t_end", "simulation", required=False),
        rtol=_num(sim, "rtol", "simulation", 1e-6, False),
        atol=_num(sim, "atol", "simulation", 1e-6, False),
        output_dt=_num(sim, "output_dt", "simulation", required=False),
        initial_state=state0,
        band_rad=_unit(sim, "band", "simulation", "angle", False,
                       math.radians(2.0)),
        root_locus=_root_locus(d),
        identify=_identify(d),
        material=_material(d),
        angle_unit=angle_unit,
        pressure_unit=pressure_unit,
        out_dir=str(out.get("dir", "out")),
        csv=bool(out.get("csv", True)),
        svg=bool(out.get("svg", True)),
    )
    for key in ("rtol", "atol"):
        if not cfg[key] > 0:
            raise ValidationError(f"simulation.{key}", "must be positive")
    if cfg["t_end"] is not None and not cfg["t_end"] > 0:
        raise ValidationError("simulation.t_end", "must be positive")
    if cfg["output_dt"] is not None and not cfg["output_dt"] > 0:
        raise ValidationError("simulation.output_dt", "must be positive")
    if cfg["pressure_pa"] is not None and cfg["pressure_pa"] < 0:
        raise ValidationError("pressure", "must be >= 0")

    # pid_step and trajectory default to the reference's own length
    if scenario in ("pid_step", "trajectory") and cfg["t_end"] is None \
            and cfg["reference"] is not None:
        dur = cfg["reference"].duration
        if dur > 0:
            cfg["t_end"] = dur
    have = {"geometry": geom, "body": body, "elastomer": cfg["elastomer"],
            "pressure": cfg["pressure_pa"], "t_end": cfg["t_end"],
            "controller": cfg["controller"], "reference": cfg["reference"],
            "root_locus": cfg["root_locus"], "identify": cfg["identify"],
            "material": cfg["material"]}
    for name in _REQUIRED[scenario]:
        if have[name] is None:
            raise ValidationError(name, f"required for scenario {scenario}")
    if scenario in ("pid_step", "trajectory") and cfg["t_end"] is None:
        raise ValidationError("t_end", "required for a constant reference")
    return RunConfig(**cfg)


def parse_config(path, scenario=None) -> RunConfig:
    """Read and validate a JSON config file.

    ``scenario`` fills in the scenario when the document omits it.

    Raises:
        ParseError: malformed JSON, with the line and column.
        ValidationError: a missing or invalid field, named in ``err.field``.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if text else ""
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}\n"
                         f"    {line.strip()}") from exc
    if scenario is not None and isinstance(doc, dict):
        doc.setdefault("scenario", scenario)
    return config_from_dict(doc)


def _reference_dict(ref):
    if ref is None:
        return None
    if isinstance(ref, ConstantReference):
        return {"type": "constant", "phi_rad": ref.phi}
    if isinstance(ref, StepSchedule):
        return {"type": "steps", "steps_rad": [list(s) for s in ref.steps]}
    if isinstance(ref, CubicTrajectory):
        return {"type": "cubic", "phi_0_rad": ref.phi_0,
                "phi_f_rad": ref.phi_f, "t_f": ref.t_f}
    if isinstance(ref, ChainedTrajectory):
        return {"type": "chained", "phi_start_rad": ref.phi_start,
                "waypoints_rad": [list(w) for w in ref.waypoints]}
    raise TypeError(f"cannot serialize reference {ref!r}")


def config_to_dict(c: RunConfig) -> dict:
    """JSON-ready document in SI keys that parses back to ``c``."""
    d = {"scenario": c.scenario}
    if c.geometry is not None:
        d["geometry"] = {"winding_angle_rad": c.geometry.winding_angle_rad,
                         "length_m": c.geometry.length_m,
                         "radius_m": c.geometry.radius_m}
    if c.body is not None:
        d["body"] = {"end_cap_mass_kg": c.body.end_cap_mass_kg,
                     "end_cap_inertia_kgm2": c.body.end_cap_inertia_kgm2}
    if c.elastomer is not None:
        e = c.elastomer
        d["elastomer"] = {"k_e": e.k_e, "k_t": e.k_t, "c_e": e.c_e, "c_t": e.c_t}
    d["loads"] = {"axial_force_N": c.loads.axial_force_N,
                  "moment_Nm": c.loads.moment_Nm}
    if c.pressure_pa is not None:
        d["pressure_pa"] = c.pressure_pa
    if c.controller is not None:
        g = c.controller
        d["controller"] = {"k_p": g.k_p, "k_i": g.k_i, "k_d": g.k_d,
                           "p_max_pa": g.p_max}
    ref = _reference_dict(c.reference)
    if ref is not None:
        d["reference"] = ref
    sim = {"rtol": c.rtol, "atol": c.atol, "band_rad": c.band_rad}
    if c.t_end is not None:
        sim["t_end"] = c.t_end
    if c.output_dt is not None:
        sim["output_dt"] = c.output_dt
    d["simulation"] = sim
    s0 = c.initial_state
    d["initial_state"] = {"s_m": s0.s, "phi_rad": s0.phi, "s_dot": s0.s_dot,
                          "phi_dot_rad": s0.phi_dot, "err_int": s0.err_int}
    if c.root_locus is not None:
        rl = c.root_locus
        d["root_locus"] = {"sweep": rl.sweep, "n_gains": rl.n_gains,
                           "direct_law": rl.direct_law}
        if rl.gains is not None:
            d["root_locus"]["gains"] = list(rl.gains)
    if c.identify is not None:
        i = c.identify
        d["identify"] = {k: v for k, v in (
            ("samples_csv", i.samples_csv), ("vibration_csv", i.vibration_csv),
            ("channel", i.channel), ("inertia_like", i.inertia_like))
            if v is not None}
    if c.material is not None:
        m = c.material
        d["material"] = {"n_points": m.n_points}
        if m.thin_wall is not None:
            p, r, b, E, nu = m.thin_wall
            d["material"]["thin_wall"] = {"p_max_pa": p, "r_m": r, "b_m": b,
                                          "E_pa": E, "nu": nu}
        if m.ogden is not None:
            mu, a, lam = m.ogden
            d["material"]["ogden"] = {"mu_pa": mu, "alpha": a,
                                      "stretch_max": lam}
    d["units"] = {"angle": c.angle_unit, "pressure": c.pressure_unit}
    d["output"] = {"dir": c.out_dir, "csv": c.csv, "svg": c.svg}
    return d


def write_config(c: RunConfig, path):
    path = Path(path)
    path.write_text(json.dumps(config_to_dict(c), indent=2) + "\n")
    return path
