"""Run configuration: a JSON file validated against a fixed schema.

Validation happens before any computation. Unknown keys are rejected at
every nesting level, and every complaint names the offending field path
(plus the source line when it can be located in the file).
"""

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, PreconditionError
from .models import MODEL_NAMES, builtin_model

# leaf types understood by the validator
_ATOMS = ("number", "positive", "int", "bool", "string", "pair",
          "window", "number_list", "params")

_LADDER = {"min": "positive", "max": "positive", "count": "int", "log": "bool"}

_SCHEMA = {
    "model": {"name": "string", "params": "params"},
    "eps": "eps",                     # scalar or {min, max, count, log}
    "window": "window",
    "out": "string",
    "resolution": "int",
    "tolerances": {"integrate": "positive", "cycle": "positive",
                   "measure": "positive"},
    "section": {"base": "pair", "direction": "pair",
                "half_width": "positive", "orientation": "int"},
    "simulate": {"initial": "pair", "t_span": "positive"},
    "scale": {"rho": "positive", "cycles": "bool", "seed_shift": "number"},
    "regimes": {"v0_values": "number_list", "delta": "positive",
                "eps": "positive", "mu_s": "number", "a1": "number",
                "a3": "number", "amplitude_floor": "positive",
                "dwell_threshold": "positive"},
    "strokes": {"eps_values": "number_list", "delta_values": "number_list",
                "base_params": "params"},
    "riccati": {"a0": "positive", "b1": "positive", "d0": "positive",
                "x2_span": "pair", "delta": "positive", "samples": "int"},
}

# which top-level blocks each command may use, beyond the always-legal ones
_COMMON_KEYS = ("model", "eps", "window", "out", "tolerances")
_COMMAND_KEYS = {
    "analyze": ("resolution",),
    "cycle": ("resolution",),
    "simulate": ("simulate", "section", "resolution"),
    "scale": ("scale", "resolution"),
    "regimes": ("regimes",),
    "strokes": ("strokes",),
    "riccati": ("riccati",),
    "list-models": (),
}

_NEEDS_MODEL = ("analyze", "cycle", "simulate", "scale")
_NEEDS_EPS = ("simulate",)


@dataclass
class RunConfig:
    command: str
    source_path: str
    raw: dict
    model_name: str = ""
    model_params: dict = field(default_factory=dict)
    eps: float = None
    eps_values: np.ndarray = None
    window: tuple = None
    out: str = "gspt_out"
    tolerances: dict = field(default_factory=dict)

    def block(self, name):
        return self.raw.get(name, {})

    def build_model(self):
        try:
            return builtin_model(self.model_name, self.model_params)
        except PreconditionError as exc:
            raise ConfigError(f"model: {exc}") from exc


def _line_of(source, key):
    """Best-effort source line of a quoted key, for diagnostics."""
    needle = f'"{key}"'
    for i, line in enumerate(source.splitlines(), start=1):
        if needle in line:
            return i
    return None


def _fail(source, path, message):
    key = path.split(".")[-1]
    line = _line_of(source, key)
    where = f"{path} (line {line})" if line else path
    raise ConfigError(f"{where}: {message}")


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_atom(source, path, value, kind):
    if kind == "number":
        if not _is_number(value):
            _fail(source, path, f"expected a number, got {value!r}")
    elif kind == "positive":
        if not _is_number(value) or not value > 0:
            _fail(source, path, f"expected a positive number, got {value!r}")
    elif kind == "int":
        if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
            _fail(source, path, f"expected a positive integer, got {value!r}")
    elif kind == "bool":
        if not isinstance(value, bool):
            _fail(source, path, f"expected true/false, got {value!r}")
    elif kind == "string":
        if not isinstance(value, str):
            _fail(source, path, f"expected a string, got {value!r}")
    elif kind == "pair":
        if (not isinstance(value, list) or len(value) != 2
                or not all(_is_number(v) for v in value)):
            _fail(source, path, f"expected [a, b] with two numbers, got {value!r}")
    elif kind == "window":
        if (not isinstance(value, list) or len(value) != 4
                or not all(_is_number(v) for v in value)):
            _fail(source, path, "expected [x_min, x_max, y_min, y_max]")
        if not (value[0] < value[1] and value[2] < value[3]):
            _fail(source, path, "window bounds must satisfy min < max")
    elif kind == "number_list":
        if (not isinstance(value, list) or not value
                or not all(_is_number(v) for v in value)):
            _fail(source, path, f"expected a non-empty list of numbers, got {value!r}")
    elif kind == "params":
        if not isinstance(value, dict):
            _fail(source, path, f"expected an object of numbers, got {value!r}")
        for k, v in value.items():
            if not _is_number(v):
                _fail(source, f"{path}.{k}", f"expected a number, got {v!r}")
    else:  # pragma: no cover - schema typo guard
        raise AssertionError(f"bad schema atom {kind!r}")


def _check_node(source, path, value, schema):
    if schema == "eps":
        if _is_number(value):
            if not value > 0:
                _fail(source, path, f"eps must be positive, got {value!r}")
            return
        if isinstance(value, dict):
            _check_node(source, path, value, _LADDER)
            for req in ("min", "max", "count"):
                if req not in value:
                    _fail(source, path, f"eps ladder missing '{req}'")
            if not value["min"] < value["max"]:
                _fail(source, path, "eps ladder needs min < max")
            if value["count"] < 2:
                _fail(source, path, "eps ladder needs count >= 2")
            return
        _fail(source, path, "expected a positive number or {min, max, count, log}")
    elif isinstance(schema, dict):
        if not isinstance(value, dict):
            _fail(source, path, f"expected an object, got {value!r}")
        for key, sub in value.items():
            child = f"{path}.{key}" if path else key
            if key not in schema:
                _fail(source, child, "unknown key")
            _check_node(source, child, sub, schema[key])
    elif schema in _ATOMS:
        _check_atom(source, path, value, schema)
    else:  # pragma: no cover - schema typo guard
        raise AssertionError(f"bad schema node {schema!r}")


def _eps_array(spec):
    if _is_number(spec):
        return np.array([float(spec)])
    lo, hi, n = spec["min"], spec["max"], spec["count"]
    if spec.get("log", True):
        return np.logspace(math.log10(lo), math.log10(hi), n)
    return np.linspace(lo, hi, n)


def load_config(path, command):
    """Parse and validate a JSON run configuration for one CLI command."""
    if command not in _COMMAND_KEYS:
        raise ConfigError(f"unknown command '{command}'")
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        source = fh.read()
    try:
        raw = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"invalid JSON at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("top level of the config must be a JSON object")

    allowed = set(_COMMON_KEYS) | set(_COMMAND_KEYS[command])
    schema = {k: v for k, v in _SCHEMA.items() if k in allowed}
    _check_node(source, "", raw, schema)

    cfg = RunConfig(command=command, source_path=path, raw=raw)
    if "model" in raw:
        if "name" not in raw["model"]:
            _fail(source, "model", "missing 'name'")
        cfg.model_name = raw["model"]["name"]
        if cfg.model_name not in MODEL_NAMES:
            _fail(source, "model.name",
                  f"unknown model '{cfg.model_name}'; "
                  f"available: {', '.join(MODEL_NAMES)}")
        cfg.model_params = dict(raw["model"].get("params", {}))
    elif command in _NEEDS_MODEL:
        raise ConfigError(f"command '{command}' requires a 'model' block")

    if "eps" in raw:
        cfg.eps_values = _eps_array(raw["eps"])
        cfg.eps = float(cfg.eps_values[-1]) if len(cfg.eps_values) == 1 else None
        if _is_number(raw["eps"]):
            cfg.eps = float(raw["eps"])
    elif command in _NEEDS_EPS:
        raise ConfigError(f"command '{command}' requires 'eps'")

    if "window" in raw:
        cfg.window = tuple(float(v) for v in raw["window"])
    if "out" in raw:
        cfg.out = raw["out"]
    cfg.tolerances = dict(raw.get("tolerances", {}))

    if command in _NEEDS_MODEL:
        cfg.build_model()        # surface bad params as a config error
    return cfg
