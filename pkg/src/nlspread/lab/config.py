"""JSON experiment configuration with strict validation.

Layout (defaults in brackets)::

    {
      "solver": {
        "d": ..., "nu": ..., "mu": ..., "h0": ...,
        "kernel": {"type": "gaussian", "params": {"sigma": 1}},
        "reaction": {"reaction": "logistic"},        [logistic]
        "n": 400, "cfl": 0.5, "t_end": 60,            [400, 0.5, 60]
        "snapshot_every": 50, "sample_dt": 0.1,       [50, 0.1]
        "profile": {"type": "parabolic", "amplitude": 1}   [parabolic, 1]
      },
      "experiment": {"type": "simulate", ...},        [simulate]
      "output_dir": "out",                            [out]
      "record_timing": true                           [true]
    }

Experiment types and their parameters:

* ``simulate``: ``window_fraction`` [0.5]
* ``eigen``: ``h`` (required), ``a0`` [f0], ``nodes`` [automatic]
* ``critical_length``: ``tol`` [1e-6]
* ``semiwave``: ``mode`` [right], ``L``, ``nodes`` [automatic]
* ``speeds``: ``L``, ``nodes`` [automatic]
* ``dichotomy_scan``: ``mu_lo``, ``mu_hi`` (required), ``tol_rel`` [0.05]
* ``acceleration_check``: ``checkpoints`` [[20, 40]], ``radii`` [[5, 10, 20]]
* ``vanishing_bound``: ``h_tilde`` [best on a grid]
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..errors import ConfigError
from ..fbsolver import Profile, SolverConfig
from ..kernel import DIVERGENT, kernel_from_config
from ..reaction import reaction_from_config

SOLVER_KEYS = {
    "d", "nu", "mu", "h0", "kernel", "reaction", "n", "cfl", "t_end",
    "snapshot_every", "sample_dt", "profile",
}
REQUIRED_SOLVER = ("d", "nu", "mu", "h0", "kernel")
TOP_KEYS = {"solver", "experiment", "output_dir", "record_timing"}

EXPERIMENTS: dict[str, dict[str, Any]] = {
    "simulate": {"window_fraction": 0.5},
    "eigen": {"h": None, "a0": None, "nodes": None},
    "critical_length": {"tol": 1e-6},
    "semiwave": {"mode": "right", "L": None, "nodes": None},
    "speeds": {"L": None, "nodes": None},
    "dichotomy_scan": {"mu_lo": None, "mu_hi": None, "tol_rel": 0.05},
    "acceleration_check": {"checkpoints": [20.0, 40.0], "radii": [5.0, 10.0, 20.0]},
    "vanishing_bound": {"h_tilde": None},
}
REQUIRED_PARAMS = {"eigen": ("h",), "dichotomy_scan": ("mu_lo", "mu_hi")}


@dataclass
class Experiment:
    type: str
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class LabConfig:
    solver: SolverConfig
    experiment: Experiment
    output_dir: Path
    profile: Profile = field(default_factory=Profile.parabolic)
    record_timing: bool = True
    warnings: list[str] = field(default_factory=list)


def _number(value: Any, path: str, *, positive: bool = False, nonneg: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    v = float(value)
    if not math.isfinite(v):
        raise ConfigError(f"{path}: must be finite")
    if positive and not v > 0:
        raise ConfigError(f"{path}: must be > 0, got {v}")
    if nonneg and not v >= 0:
        raise ConfigError(f"{path}: must be >= 0, got {v}")
    return v


def _integer(value: Any, path: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {value}")
    return value


def _profile(raw: Any) -> Profile:
    if not isinstance(raw, dict):
        raise ConfigError("solver.profile: expected an object")
    kind = raw.get("type", "parabolic")
    if kind == "parabolic":
        extra = set(raw) - {"type", "amplitude"}
        if extra:
            raise ConfigError(f"solver.profile: unknown keys {sorted(extra)}")
        return Profile.parabolic(_number(raw.get("amplitude", 1.0), "solver.profile.amplitude", positive=True))
    if kind == "custom":
        extra = set(raw) - {"type", "values"}
        if extra:
            raise ConfigError(f"solver.profile: unknown keys {sorted(extra)}")
        vals = raw.get("values")
        if not isinstance(vals, list):
            raise ConfigError("solver.profile.values: expected a list of numbers")
        return Profile.custom([_number(v, f"solver.profile.values[{i}]") for i, v in enumerate(vals)])
    raise ConfigError(f"solver.profile.type: unknown profile {kind!r}")


def solver_from_dict(raw: Any) -> tuple[SolverConfig, Profile]:
    if not isinstance(raw, dict):
        raise ConfigError("solver: expected an object")
    extra = set(raw) - SOLVER_KEYS
    if extra:
        raise ConfigError(f"solver: unknown keys {sorted(extra)}")
    for key in REQUIRED_SOLVER:
        if key not in raw:
            raise ConfigError(f"solver.{key}: required")
    try:
        kernel = kernel_from_config(raw["kernel"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver.kernel: {exc}") from None
    try:
        reaction = reaction_from_config(raw.get("reaction", {"reaction": "logistic"}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver.reaction: {exc}") from None
    kw: dict[str, Any] = {
        "d": _number(raw["d"], "solver.d", positive=True),
        "nu": _number(raw["nu"], "solver.nu", nonneg=True),
        "mu": _number(raw["mu"], "solver.mu", positive=True),
        "h0": _number(raw["h0"], "solver.h0", positive=True),
        "kernel": kernel,
        "reaction": reaction,
    }
    if "n" in raw:
        kw["n"] = _integer(raw["n"], "solver.n", 64)
    if "cfl" in raw:
        kw["cfl"] = _number(raw["cfl"], "solver.cfl", positive=True)
        if kw["cfl"] > 1:
            raise ConfigError("solver.cfl: must be <= 1")
    if "t_end" in raw:
        kw["t_end"] = _number(raw["t_end"], "solver.t_end", positive=True)
    if "snapshot_every" in raw:
        kw["snapshot_every"] = _integer(raw["snapshot_every"], "solver.snapshot_every", 1)
    if "sample_dt" in raw:
        kw["sample_dt"] = _number(raw["sample_dt"], "solver.sample_dt", positive=True)
    profile = _profile(raw["profile"]) if "profile" in raw else Profile.parabolic()
    try:
        cfg = SolverConfig(**kw)
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from None
    return cfg, profile


def experiment_from_dict(raw: Any) -> Experiment:
    if raw is None:
        raw = {"type": "simulate"}
    if isinstance(raw, str):
        raw = {"type": raw}
    if not isinstance(raw, dict):
        raise ConfigError("experiment: expected an object")
    kind = raw.get("type", "simulate")
    if kind not in EXPERIMENTS:
        raise ConfigError(f"experiment.type: unknown experiment {kind!r}")
    allowed = EXPERIMENTS[kind]
    extra = set(raw) - {"type"} - set(allowed)
    if extra:
        raise ConfigError(f"experiment: unknown keys {sorted(extra)} for {kind}")
    params = {k: raw.get(k, v) for k, v in allowed.items()}
    for key in REQUIRED_PARAMS.get(kind, ()):
        if params[key] is None:
            raise ConfigError(f"experiment.{key}: required for {kind}")
    for key, val in params.items():
        path = f"experiment.{key}"
        if val is None or key == "mode":
            continue
        if key in ("checkpoints", "radii"):
            if not isinstance(val, list) or not val:
                raise ConfigError(f"{path}: expected a nonempty list")
            nums = [_number(v, f"{path}[{i}]", positive=True) for i, v in enumerate(val)]
            if any(b <= a for a, b in zip(nums, nums[1:])):
                raise ConfigError(f"{path}: must be strictly increasing")
            params[key] = nums
        elif key == "nodes":
            params[key] = _integer(val, path, 2)
        elif key == "a0":
            params[key] = _number(val, path)
        else:
            params[key] = _number(val, path, positive=True)
    if kind == "semiwave" and params["mode"] not in ("right", "neutral", "left"):
        raise ConfigError(f"experiment.mode: expected right, neutral or left, got {params['mode']!r}")
    if kind == "dichotomy_scan" and not params["mu_lo"] < params["mu_hi"]:
        raise ConfigError("experiment.mu_lo: must be < experiment.mu_hi")
    if kind == "simulate" and not 0 < params["window_fraction"] < 1:
        raise ConfigError("experiment.window_fraction: must lie in (0, 1)")
    return Experiment(kind, params)


def config_from_dict(raw: Any) -> LabConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object at top level")
    extra = set(raw) - TOP_KEYS
    if extra:
        raise ConfigError(f"config: unknown keys {sorted(extra)}")
    if "solver" not in raw:
        raise ConfigError("solver: required")
    solver, profile = solver_from_dict(raw["solver"])
    exp = experiment_from_dict(raw.get("experiment"))
    out = raw.get("output_dir", "out")
    if not isinstance(out, str) or not out:
        raise ConfigError("output_dir: expected a nonempty string")
    timing = raw.get("record_timing", True)
    if not isinstance(timing, bool):
        raise ConfigError("record_timing: expected true or false")
    cfg = LabConfig(solver, exp, Path(out), profile, timing)
    msg = _advection_check(solver)
    if msg:
        cfg.warnings.append(msg)
    return cfg


def _advection_check(solver: SolverConfig) -> str | None:
    try:
        return solver.advection_warning()
    except Exception as exc:  # pragma: no cover
        return f"could not evaluate the minimal wave speed: {exc}"


def parse_config(path) -> LabConfig:
    """Read and validate a JSON configuration file."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{p}: cannot read config ({exc.strerror})") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from None
    return config_from_dict(raw)


def c_tilde_json(value) -> float | str:
    return "infinite" if value is DIVERGENT else float(value)
