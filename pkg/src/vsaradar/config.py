"""JSON experiment configuration: schema validation, presets, canonical form.

A config document names a scenario (preset name or object), one or more
estimation methods, and optional overrides for the noise model, the VSA
grid search, the filter tuning and the sweep axis. Anything omitted takes
the library defaults. :func:`serialize_config` writes the fully expanded
document; parsing it back yields an equal :class:`ExperimentConfig`.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import asdict, fields, replace
from importlib import resources

import jsonschema

from .geometry import RoomBounds
from .montecarlo import DEFAULT_SEED, ExperimentConfig, ExperimentError, ScenarioConfig, SweepAxis
from .scenario import ScenarioError, TrajectorySpec
from .signal import NoiseModel
from .tracking import EkfTuning, TrackingError, VsaParams


class ConfigError(ValueError):
    """Malformed or invalid configuration (CLI exit code 1)."""


class ConfigParseError(ConfigError):
    pass


class ConfigSchemaError(ConfigError):
    pass


def load_schema() -> dict:
    return json.loads(resources.files("vsaradar").joinpath("config_schema.json").read_text())


# --------------------------------------------------------------------------
# Presets

SCENARIO_PRESETS = {
    # straight pass through (1, 3) at (0, -1) m/s; the lead-in before t_start
    # only feeds delayed radar samples
    "fig5": ScenarioConfig(
        TrajectorySpec("waypoints", vertices=((1.0, 3.5), (1.0, 1.5)), cruise_speed=1.0, corner_speed=1.0),
        t_start=0.5, duration=1.0, name="fig5"),
    "rhombus": ScenarioConfig(TrajectorySpec("rhombus", center=(2.5, 3.0), half_diagonals=(1.5, 1.5)),
                              name="rhombus"),
    "circle": ScenarioConfig(TrajectorySpec("circle", center=(2.5, 4.2), radius=1.5,
                                            cruise_speed=1.5, corner_speed=1.5), name="circle"),
    "star": ScenarioConfig(TrajectorySpec("star", center=(2.5, 4.2), outer_radius=1.7, inner_radius=0.68),
                           name="star"),
}

_TWO = ["ekf_baseline", "vsa"]
EXPERIMENT_PRESETS = {
    "fig5": {"scenario": "fig5", "method": ["trilateration", "vsa"]},
    "fig6a": {"scenario": "fig5", "method": _TWO, "sweep": {"axis": "snr_db", "values": [0, 5, 10, 15, 20]}},
    "fig6b": {"scenario": "fig5", "method": _TWO,
              "sweep": {"axis": "outlier_prob", "values": [0.0, 0.05, 0.10, 0.15, 0.20]}},
    "fig6c": {"scenario": "fig5", "method": _TWO,
              "sweep": {"axis": "clock_offset", "values": [0.0, 0.010, 0.025, 0.050]}},
    "fig6d": {"scenario": "fig5", "method": _TWO, "sweep": {"axis": "n_pri", "values": [64, 128, 256, 512, 1024]}},
    "fig6e": {"scenario": "fig5", "method": _TWO,
              "sweep": {"axis": "grid_points", "values": [25, 50, 100, 200, 400]}},
    "table1-rhombus": {"scenario": "rhombus", "method": _TWO},
    "table1-circle": {"scenario": "circle", "method": _TWO},
    "table1-star": {"scenario": "star", "method": _TWO},
}


def preset_document(name: str) -> dict:
    if name not in EXPERIMENT_PRESETS:
        raise ConfigError(f"unknown preset {name!r}; expected one of {sorted(EXPERIMENT_PRESETS)}")
    return copy.deepcopy(EXPERIMENT_PRESETS[name])


# --------------------------------------------------------------------------
# Document <-> config

def _schema_message(err: jsonschema.ValidationError) -> str:
    where = ".".join(str(p) for p in err.absolute_path) or "<root>"
    field = next((str(p) for p in reversed(err.absolute_path) if isinstance(p, str)), where)
    sch = err.schema if isinstance(err.schema, dict) else {}
    lo = sch.get("minimum", sch.get("exclusiveMinimum"))
    hi = sch.get("maximum", sch.get("exclusiveMaximum"))
    if err.validator in ("minimum", "maximum", "exclusiveMinimum", "exclusiveMaximum"):
        left = "(" if "exclusiveMinimum" in sch else "["
        right = ")" if "exclusiveMaximum" in sch else "]"
        lo_s = "-inf" if lo is None else f"{lo:g}"
        hi_s = "inf" if hi is None else f"{hi:g}"
        return f"{where}: {field} ∈ {left}{lo_s},{hi_s}{right} (got {err.instance!r})"
    return f"{where}: {err.message}"


def _best_error(errors):
    # oneOf failures hide the useful bound message one level down
    err = jsonschema.exceptions.best_match(errors)
    while err.context:
        err = jsonschema.exceptions.best_match(err.context)
    return err


def validate_document(doc) -> None:
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = list(validator.iter_errors(doc))
    if errors:
        raise ConfigSchemaError(_schema_message(_best_error(errors)))


def _num(x):
    return math.inf if x == "inf" else x


def _json_num(x):
    return "inf" if isinstance(x, float) and math.isinf(x) else x


def _scenario_from(doc) -> ScenarioConfig:
    if isinstance(doc, str):
        return SCENARIO_PRESETS[doc]
    base = SCENARIO_PRESETS[doc["preset"]] if "preset" in doc else ScenarioConfig()
    kw = {}
    if "trajectory" in doc:
        t = dict(doc["trajectory"])
        for key in ("center", "half_diagonals"):
            if key in t:
                t[key] = tuple(float(v) for v in t[key])
        if "vertices" in t:
            t["vertices"] = tuple(tuple(float(v) for v in p) for p in t["vertices"])
        kw["trajectory"] = TrajectorySpec(**t)
    if "bounds" in doc:
        kw["bounds"] = RoomBounds(**doc["bounds"])
    for key in ("radar2_offset", "n_pri", "t_start", "duration", "name"):
        if key in doc:
            kw[key] = doc[key]
    return replace(base, **kw)


def config_from_document(doc: dict) -> ExperimentConfig:
    """Validate ``doc`` against the schema and build the config."""
    validate_document(doc)
    try:
        scenario = _scenario_from(doc["scenario"])
        method = doc.get("method", "vsa")
        methods = (method,) if isinstance(method, str) else tuple(method)
        noise = NoiseModel(**{k: _num(v) for k, v in doc.get("noise", {}).items()})
        v = dict(doc.get("vsa", {}))
        if "eps_theta_deg" in v:
            v["eps_theta"] = math.radians(_num(v.pop("eps_theta_deg")))
        if "eps_d" in v:
            v["eps_d"] = _num(v["eps_d"])
        vsa = VsaParams(**v)
        ekf = EkfTuning(**doc.get("ekf", {}))
        sweep = None
        if "sweep" in doc:
            s = doc["sweep"]
            vals = tuple(int(x) if s["axis"] in ("n_pri", "grid_points") else float(x) for x in s["values"])
            sweep = SweepAxis(s["axis"], vals)
        return ExperimentConfig(scenario, methods, noise, vsa, ekf,
                                doc.get("n_trials", 50), doc.get("base_seed", DEFAULT_SEED), sweep)
    except (ExperimentError, ScenarioError, TrackingError, ValueError, TypeError) as exc:
        raise ConfigSchemaError(str(exc)) from exc


def parse_config(path) -> ExperimentConfig:
    """Read and validate a JSON config file."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{path}: malformed JSON ({exc.msg} at line {exc.lineno})") from exc
    return config_from_document(doc)


def config_to_document(cfg: ExperimentConfig) -> dict:
    """Fully expanded, JSON-ready form of ``cfg``."""
    sc = cfg.scenario
    traj = asdict(sc.trajectory)
    traj["center"] = list(traj["center"])
    traj["half_diagonals"] = list(traj["half_diagonals"])
    traj["vertices"] = [list(p) for p in traj["vertices"]]
    theta = cfg.vsa_params.eps_theta
    doc = {
        "scenario": {
            "name": sc.name,
            "trajectory": traj,
            "radar2_offset": sc.radar2_offset,
            "n_pri": sc.n_pri,
            "t_start": sc.t_start,
            "duration": sc.duration,
            "bounds": asdict(sc.bounds),
        },
        "method": list(cfg.methods),
        "noise": {f.name: _json_num(getattr(cfg.noise, f.name)) for f in fields(cfg.noise)},
        "vsa": {
            "delta": cfg.vsa_params.delta,
            "grid_points": cfg.vsa_params.grid_points,
            "eps_d": _json_num(cfg.vsa_params.eps_d),
            "eps_theta_deg": _json_num(math.degrees(theta)),
            "residual_velocity_weight": cfg.vsa_params.residual_velocity_weight,
        },
        "ekf": asdict(cfg.ekf),
        "n_trials": cfg.n_trials,
        "base_seed": cfg.base_seed,
    }
    if cfg.sweep is not None:
        doc["sweep"] = {"axis": cfg.sweep.name, "values": list(cfg.sweep.values)}
    return doc


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical JSON text (sorted keys, compact separators)."""
    return json.dumps(config_to_document(cfg), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode("utf-8")).hexdigest()


def load_config(path=None, preset=None, seed=None, trials=None) -> ExperimentConfig:
    """Config from a file or a preset name, with CLI overrides applied."""
    if (path is None) == (preset is None):
        raise ConfigError("give exactly one of a config file or a preset")
    cfg = parse_config(path) if path is not None else config_from_document(preset_document(preset))
    over = {}
    if seed is not None:
        if not (0 <= seed < 2**64):
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        over["base_seed"] = seed
    if trials is not None:
        if trials < 1:
            raise ConfigError("--trials must be >= 1")
        over["n_trials"] = trials
    return replace(cfg, **over) if over else cfg
