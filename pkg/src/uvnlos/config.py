"""Scenario configuration: JSON documents with explicit units, plus named presets.

Angles must carry "deg" or "rad"; attenuation coefficients "km^-1" or "m^-1";
the aperture area "cm2" or "m2".  Lengths may be bare numbers (metres) or carry
"m"/"km".  Everything is converted to SI on load.
"""
from __future__ import annotations

import copy
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, DomainError, ParseError, ValidationError
from .geometry.scene import ObstacleBox, SystemGeometry, range_scaled_obstacle
from .mcpt import McptSpec
from .reflection import ReflectionSurface
from .scattering import Atmosphere, QuadratureSpec

_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_UNIT_RE = re.compile(rf"^\s*({_NUMBER})\s*([A-Za-z0-9^\-/]+)\s*$")

# value in SI = number * mul / div (division keeps 0.9 km^-1 == 9e-4 exactly)
ANGLE_UNITS = {"deg": (math.pi, 180.0), "rad": (1.0, 1.0)}
COEFF_UNITS = {"km^-1": (1.0, 1e3), "m^-1": (1.0, 1.0)}
AREA_UNITS = {"cm2": (1.0, 1e4), "m2": (1.0, 1.0)}
LENGTH_UNITS = {"m": (1.0, 1.0), "km": (1e3, 1.0)}

# section -> field -> kind
SCHEMA = {
    "geometry": {"beta_t": "angle", "beta_r": "angle", "theta_t": "angle", "theta_r": "angle",
                 "alpha_t": "angle", "alpha_r": "angle", "range_r": "length",
                 "aperture_area": "area", "pulse_energy": "number"},
    "atmosphere": {"ks_ray": "coeff", "ks_mie": "coeff", "ka": "coeff", "gamma": "number",
                   "g": "number", "f": "number"},
    "obstacle": {"rule": "text", "thickness": "length", "width": "length", "height": "length",
                 "center_x": "length", "center_y": "length_or_half_range"},
    "surface": {"r_r": "number", "m_s": "number", "eta": "number"},
    "quadrature": {"n_vartheta": "int", "n_varpi": "int", "n_tau": "int", "tau_truncation": "number",
                   "epsilon_floor": "length", "n_facade_y": "int", "n_facade_z": "int"},
    "mcpt": {"n_photons": "int", "survival_threshold": "number", "rng_seed": "int", "batch_size": "int"},
    "sweep": {"ranges": "length_list", "offsets": "length_list"},
    "analysis": {"blockage": "text", "exact_omega": "bool"},
}
REQUIRED = {
    "geometry": ("beta_t", "beta_r", "theta_t", "theta_r", "alpha_t", "alpha_r", "range_r"),
    "atmosphere": ("ks_ray", "ks_mie", "ka"),
}
OBSTACLE_FIELDS = ("thickness", "width", "height", "center_x", "center_y")

_TABLE3_BASE = {
    "geometry": {"beta_t": "30 deg", "beta_r": "30 deg", "theta_t": "25 deg", "theta_r": "25 deg",
                 "alpha_t": "95 deg", "alpha_r": "-95 deg", "range_r": "100 m",
                 "aperture_area": "1.92 cm2", "pulse_energy": 1.0},
    "atmosphere": {"ks_ray": "0.24 km^-1", "ks_mie": "0.25 km^-1", "ka": "0.9 km^-1",
                   "gamma": 0.017, "g": 0.72, "f": 0.5},
    "obstacle": {"rule": "range-scaled"},
    "surface": {"r_r": 0.1, "m_s": 5, "eta": 0.5},
    "sweep": {"ranges": [50, 75, 100, 125, 150, 175, 200]},
}


def _with(base, **sections):
    out = copy.deepcopy(base)
    for name, values in sections.items():
        out.setdefault(name, {}).update(values)
    return out


PRESETS = {
    "table3-scenario1": _TABLE3_BASE,
    "table3-scenario2": _with(_TABLE3_BASE, geometry={"theta_t": "35 deg", "theta_r": "35 deg"}),
    "table3-split": _with(_TABLE3_BASE, geometry={"theta_t": "25 deg", "theta_r": "35 deg"}),
    "table4": _with(
        _TABLE3_BASE,
        geometry={"beta_t": "15 deg", "beta_r": "15 deg", "theta_t": "20 deg", "theta_r": "20 deg",
                  "alpha_t": "120 deg", "alpha_r": "-120 deg", "range_r": "200 m"},
        obstacle={"rule": "explicit", "thickness": "30 m", "width": "40 m", "height": "80 m",
                  "center_x": "-45 m", "center_y": "r/2"},
        sweep={"offsets": [-20, -25, -30, -35, -40, -45, -50, -55, -60, -65, -70, -75, -80, -85,
                           -90, -95, -100, -105, -110, -115]},
    ),
}
# Elevation reading used for the 100 m headline comparison (see README).
HEADLINE_PRESET = "table3-split"


@dataclass
class SweepSpec:
    ranges: list = field(default_factory=list)
    offsets: list = field(default_factory=list)


@dataclass
class ScenarioConfig:
    geometry: SystemGeometry
    atmosphere: Atmosphere
    obstacle: ObstacleBox | None
    obstacle_rule: str | None
    surface: ReflectionSurface | None
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    mcpt: McptSpec = field(default_factory=McptSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    blockage: str = "paper"
    exact_omega: bool = True
    preset: str | None = field(default=None, compare=False)

    def obstacle_for(self, range_r: float) -> ObstacleBox | None:
        """Obstacle for a given link range, honouring the range-scaled rule."""
        if self.obstacle_rule == "range-scaled":
            return range_scaled_obstacle(range_r)
        if self.obstacle_rule == "half-range" and self.obstacle is not None:
            return self.obstacle.replace(center_y=range_r / 2.0)
        return self.obstacle


def _parse_quantity(text, units, key, problems):
    if not isinstance(text, str):
        problems.append(f"{key}: expected a string with a unit ({'|'.join(units)})")
        return None
    m = _UNIT_RE.match(text)
    if not m or m.group(2) not in units:
        problems.append(f"{key}: cannot read {text!r}; expected '<number> <{'|'.join(units)}>'")
        return None
    mul, div = units[m.group(2)]
    return float(m.group(1)) * mul / div


def _parse_length(value, key, problems):
    if isinstance(value, bool):
        problems.append(f"{key}: expected a length")
        return None
    if isinstance(value, (int, float)):
        return float(value)
    return _parse_quantity(value, LENGTH_UNITS, key, problems)


def _convert(kind, value, key, problems):
    if kind == "angle":
        return _parse_quantity(value, ANGLE_UNITS, key, problems)
    if kind == "coeff":
        return _parse_quantity(value, COEFF_UNITS, key, problems)
    if kind == "area":
        return _parse_quantity(value, AREA_UNITS, key, problems)
    if kind == "length":
        return _parse_length(value, key, problems)
    if kind == "length_or_half_range":
        return "r/2" if value == "r/2" else _parse_length(value, key, problems)
    if kind == "length_list":
        if not isinstance(value, list):
            problems.append(f"{key}: expected a list")
            return None
        return [_parse_length(v, f"{key}[{i}]", problems) for i, v in enumerate(value)]
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            problems.append(f"{key}: expected an integer")
            return None
        return int(value)
    if kind == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            problems.append(f"{key}: expected a number")
            return None
        return float(value)
    if kind == "bool":
        if not isinstance(value, bool):
            problems.append(f"{key}: expected true or false")
            return None
        return value
    if not isinstance(value, str):
        problems.append(f"{key}: expected a string")
        return None
    return value


def _merge(doc):
    preset = doc.get("preset")
    if preset is None:
        merged = {}
    elif preset in PRESETS:
        merged = copy.deepcopy(PRESETS[preset])
    else:
        raise ValidationError([f"preset: unknown preset {preset!r} (known: {', '.join(PRESETS)})"])
    for name, values in doc.items():
        if name == "preset":
            continue
        if values is None and name == "obstacle":
            merged["obstacle"] = None
            continue
        if not isinstance(values, dict):
            raise ValidationError([f"{name}: expected an object"])
        if name == "obstacle" and "rule" not in values and any(k in values for k in OBSTACLE_FIELDS):
            values = {"rule": "explicit", **values}
            if merged.get("obstacle") and merged["obstacle"].get("rule") == "range-scaled":
                merged["obstacle"] = {}
        merged.setdefault(name, {})
        if merged[name] is None:
            merged[name] = {}
        merged[name].update(values)
    return preset, merged


def build_config(doc: dict) -> ScenarioConfig:
    """Validate and convert a parsed configuration document."""
    if not isinstance(doc, dict):
        raise ValidationError(["top level: expected an object"])
    unknown = [k for k in doc if k not in SCHEMA and k != "preset"]
    problems = [f"{k}: unknown section" for k in unknown]
    preset, merged = _merge({k: v for k, v in doc.items() if k not in unknown})
    values = {}
    for section, fields in merged.items():
        if fields is None:
            values[section] = None
            continue
        out = {}
        for key, raw in fields.items():
            if key not in SCHEMA[section]:
                problems.append(f"{section}.{key}: unknown key")
                continue
            out[key] = _convert(SCHEMA[section][key], raw, f"{section}.{key}", problems)
        values[section] = out
    for section, keys in REQUIRED.items():
        for key in keys:
            if key not in (values.get(section) or {}):
                problems.append(f"{section}.{key}: missing")
    if problems:
        raise ValidationError(problems)

    def make(cls, section, label):
        try:
            return cls(**(values.get(section) or {}))
        except (DomainError, TypeError) as exc:
            problems.append(f"{label}: {exc}")
            return None

    geom = make(SystemGeometry, "geometry", "geometry")
    atm = make(Atmosphere, "atmosphere", "atmosphere")
    quad = make(QuadratureSpec, "quadrature", "quadrature")
    mc = make(McptSpec, "mcpt", "mcpt")
    surface = make(ReflectionSurface, "surface", "surface") if values.get("surface") is not None else None
    sweep = SweepSpec(**(values.get("sweep") or {}))
    analysis = values.get("analysis") or {}
    if analysis.get("blockage", "paper") not in ("paper", "oracle"):
        problems.append("analysis.blockage: must be 'paper' or 'oracle'")

    obstacle, rule = None, None
    obs_vals = values.get("obstacle")
    if obs_vals:
        rule = obs_vals.get("rule", "explicit")
        if rule == "range-scaled":
            extra = [k for k in OBSTACLE_FIELDS if k in obs_vals]
            if extra:
                problems.append(f"obstacle: fields {extra} conflict with rule 'range-scaled'")
            elif geom is not None:
                obstacle = range_scaled_obstacle(geom.range_r)
        elif rule == "explicit":
            missing = [k for k in OBSTACLE_FIELDS if k not in obs_vals]
            if missing:
                problems.extend(f"obstacle.{k}: missing" for k in missing)
            elif geom is not None:
                kw = {k: obs_vals[k] for k in OBSTACLE_FIELDS}
                if kw["center_y"] == "r/2":
                    kw["center_y"] = geom.range_r / 2.0
                    rule = "half-range"
                try:
                    obstacle = ObstacleBox(**kw)
                except DomainError as exc:
                    problems.append(f"obstacle: {exc}")
        else:
            problems.append(f"obstacle.rule: unknown rule {rule!r}")
    if problems:
        raise ValidationError(problems)
    return ScenarioConfig(geometry=geom, atmosphere=atm, obstacle=obstacle, obstacle_rule=rule,
                          surface=surface, quadrature=quad, mcpt=mc, sweep=sweep,
                          blockage=analysis.get("blockage", "paper"),
                          exact_omega=analysis.get("exact_omega", True), preset=preset)


def load_config(path) -> ScenarioConfig:
    """Read a JSON configuration file; presets expand before the file's own values."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    return build_config(doc)


def emit_config(cfg: ScenarioConfig) -> dict:
    """Self-contained document that loads back to an equal configuration."""
    g, a = cfg.geometry, cfg.atmosphere
    rad = lambda v: f"{v!r} rad"  # noqa: E731
    coeff = lambda v: f"{v!r} m^-1"  # noqa: E731
    doc = {
        "geometry": {"beta_t": rad(g.beta_t), "beta_r": rad(g.beta_r), "theta_t": rad(g.theta_t),
                     "theta_r": rad(g.theta_r), "alpha_t": rad(g.alpha_t), "alpha_r": rad(g.alpha_r),
                     "range_r": g.range_r, "aperture_area": f"{g.aperture_area!r} m2",
                     "pulse_energy": g.pulse_energy},
        "atmosphere": {"ks_ray": coeff(a.ks_ray), "ks_mie": coeff(a.ks_mie), "ka": coeff(a.ka),
                       "gamma": a.gamma, "g": a.g, "f": a.f},
        "quadrature": {k: getattr(cfg.quadrature, k) for k in SCHEMA["quadrature"]},
        "mcpt": {k: getattr(cfg.mcpt, k) for k in SCHEMA["mcpt"]},
        "sweep": {"ranges": list(cfg.sweep.ranges), "offsets": list(cfg.sweep.offsets)},
        "analysis": {"blockage": cfg.blockage, "exact_omega": cfg.exact_omega},
    }
    if cfg.obstacle_rule == "range-scaled":
        doc["obstacle"] = {"rule": "range-scaled"}
    elif cfg.obstacle is not None:
        o = cfg.obstacle
        doc["obstacle"] = {"rule": "explicit", "thickness": o.thickness, "width": o.width,
                           "height": o.height, "center_x": o.center_x,
                           "center_y": "r/2" if cfg.obstacle_rule == "half-range" else o.center_y}
    else:
        doc["obstacle"] = None
    if cfg.surface is not None:
        doc["surface"] = {"r_r": cfg.surface.r_r, "m_s": cfg.surface.m_s, "eta": cfg.surface.eta}
    return doc


__all__ = ["ScenarioConfig", "SweepSpec", "PRESETS", "HEADLINE_PRESET", "load_config", "build_config",
           "emit_config", "ConfigError"]
