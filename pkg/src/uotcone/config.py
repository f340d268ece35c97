"""Run-configuration schema: strict validation with centralized defaults.

A configuration is one JSON object per run (or ``{"runs": [...]}`` for a
sweep).  Unknown keys are rejected before any computation.  Matrices are
given as flat row-major arrays next to their size ``n``; grid fields are
plain value arrays.
"""

from __future__ import annotations

import math

from .errors import ConfigError

#: central defaults used by every command that does not override them
DEFAULTS = {
    "n": 256,          # grid points / matrix size
    "length": 2.0 * math.pi,
    "dt": 1e-3,
    "steps": 1000,
    "tol": 1e-8,       # shooting endpoint tolerance
    "max_iter": 50,    # shooting iteration budget
    "continuity_tol": 1e-5,
    "num_times": 11,   # samples of closed-form interpolations
    "p": 1.0,          # cone exponent
    "model": "small",
    "metric": "small",
    "quick": False,
}

_NUMBER = (int, float)


def _is_number_list(v):
    return isinstance(v, list) and all(
        isinstance(x, _NUMBER) and not isinstance(x, bool) for x in v)


def _is_matrix(v):
    return isinstance(v, list) and all(_is_number_list(row) for row in v)


_KINDS = {
    "int": lambda v: isinstance(v, int) and not isinstance(v, bool),
    "float": lambda v: isinstance(v, _NUMBER) and not isinstance(v, bool),
    "str": lambda v: isinstance(v, str),
    "bool": lambda v: isinstance(v, bool),
    "floats": _is_number_list,
    "matrix": _is_matrix,
}

# key -> (kind, required); optional keys fall back to DEFAULTS when present
_SCHEMAS = {
    "gauss-geodesic": {
        "n": ("int", True), "V": ("floats", True), "m": ("float", True),
        "P": ("floats", True), "xi": ("float", True),
        "dt": ("float", False), "steps": ("int", False),
    },
    "gauss-connect": {
        "n": ("int", True), "Sigma0": ("floats", True), "m0": ("float", True),
        "Sigma1": ("floats", True), "m1": ("float", True),
        "tol": ("float", False), "dt": ("float", False),
        "max_iter": ("int", False), "steps": ("int", False),
    },
    "pde-evolve": {
        "model": ("str", False), "n": ("int", False), "length": ("float", False),
        "rho": ("floats", True), "theta": ("floats", True),
        "dt": ("float", False), "steps": ("int", False),
    },
    "pde-metric": {
        "metric": ("str", False), "n": ("int", False), "length": ("float", False),
        "rho": ("floats", True), "rhodot": ("floats", True),
    },
    "fr-geodesic": {
        "n": ("int", False), "length": ("float", False),
        "rho0": ("floats", True), "rho1": ("floats", True),
        "num_times": ("int", False),
    },
    "cone-geodesic": {
        "base": ("str", True), "p": ("float", False),
        "q": ("floats", True), "q_dot": ("floats", True),
        "alpha": ("float", True), "alpha_dot": ("float", True),
        "dt": ("float", False), "steps": ("int", False),
    },
    "bb-action": {
        "n": ("int", False), "length": ("float", False),
        "source": ("str", True), "continuity_tol": ("float", False),
        # explicit paths
        "times": ("floats", False), "rhobar": ("matrix", False),
        "w": ("matrix", False), "r": ("floats", False),
        # paths derived from a conical-model run
        "rho": ("floats", False), "theta": ("floats", False),
        "dt": ("float", False), "steps": ("int", False),
    },
    "check": {
        "quick": ("bool", False),
    },
}

_CHOICES = {
    "model": ("small", "wfr"),
    "metric": ("small", "gdiv"),
    "base": ("circle", "flat", "spd"),
    "source": ("explicit", "small-run"),
}

# grid fields define their own size; do not inject the default n there
_NO_DEFAULT = {
    "pde-evolve": {"n"},
    "pde-metric": {"n"},
    "fr-geodesic": {"n"},
    "bb-action": {"n"},
}

COMMANDS = tuple(sorted(_SCHEMAS))


def validate_run(cfg):
    """Validate one run object and apply defaults; returns a plain dict."""
    if not isinstance(cfg, dict):
        raise ConfigError("a run configuration must be a JSON object")
    if "command" not in cfg:
        raise ConfigError("missing required key 'command'",
                          expected=list(COMMANDS))
    command = cfg["command"]
    if command not in _SCHEMAS:
        raise ConfigError(f"unknown command {command!r}", expected=list(COMMANDS))
    schema = _SCHEMAS[command]
    allowed = set(schema) | {"command", "name"}
    unknown = sorted(set(cfg) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys for {command}: {unknown}",
                          allowed=sorted(allowed))
    if "name" in cfg and not isinstance(cfg["name"], str):
        raise ConfigError("'name' must be a string")

    out = {"command": command}
    if "name" in cfg:
        out["name"] = cfg["name"]
    for key, (kind, required) in schema.items():
        if key in cfg:
            value = cfg[key]
            if not _KINDS[kind](value):
                raise ConfigError(f"key {key!r} must be of kind {kind}",
                                  command=command)
            if key in _CHOICES and value not in _CHOICES[key]:
                raise ConfigError(
                    f"key {key!r} must be one of {list(_CHOICES[key])}",
                    command=command)
            out[key] = value
        elif required:
            raise ConfigError(f"missing required key {key!r} for {command}")
        elif key in DEFAULTS and key not in _NO_DEFAULT.get(command, ()):
            out[key] = DEFAULTS[key]
    return out


def validate_config(doc):
    """Validate a whole config document; returns a list of run dicts."""
    if isinstance(doc, dict) and "runs" in doc:
        if set(doc) != {"runs"}:
            raise ConfigError("a sweep config may only contain the key 'runs'")
        runs = doc["runs"]
        if not isinstance(runs, list) or not runs:
            raise ConfigError("'runs' must be a non-empty list")
        return [validate_run(r) for r in runs]
    return [validate_run(doc)]
