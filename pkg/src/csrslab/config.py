"""
Run configuration: built-in defaults, JSON config files and overrides.

Precedence is command-line overrides > config file > defaults. The config
file may be given explicitly or through the CSRSLAB_CONFIG environment
variable. Unknown keys and wrongly typed values are rejected with the
offending path and, where it can be found, the line in the file.
"""

import copy
import hashlib
import json
import os

from .detection import APD, PMT
from .errors import ConfigError
from .lineshape import CARS_LINE, CSRS_LINE

ENV_VAR = "CSRSLAB_CONFIG"

DEFAULTS = {
    "temperature_K": 296.0,
    "dispersion_file": None,
    "lines": {"CARS": CARS_LINE.to_dict(), "CSRS": CSRS_LINE.to_dict()},
    "process": {
        "signal_nm": 863.0,
        "pump_hi_nm": 938.0,
        "pump_lo_nm": 1538.0,
        "pump_hi_w": 0.65,
        "pump_lo_w": 15.0,
        "signal_w": 1.0e-6,
        "waist_um": 80.0,
        "length_mm": 140.0,
        "kernel": "projected",
    },
    # "peak": anchor at the model's own efficiency maximum
    "anchors": {
        "CARS": {"pressure_bar": "peak", "internal": 8.1e-10, "external": 1.5e-11},
        "CSRS": {"pressure_bar": 12.5, "internal": 1.1e-9, "external": 9.0e-11},
    },
    "filter_transmission": 0.93,
    # null: derived from the anchor's internal/external pair
    "optics_transmission": {"CARS": None, "CSRS": None},
    "detectors": {"CARS": PMT.to_dict(), "CSRS": APD.to_dict()},
    "spectrum": {
        "pressures_bar": [1.0, 2.0, 4.0, 6.0, 8.0, 11.0, 15.0, 20.0],
        "points": 100,
        "span_linewidths": 4.0,
        "dwell_s": 120.0,
        "noise": True,
    },
    "efficiency": {"pressure_min": 0.25, "pressure_max": 30.0, "pressure_step": 0.25},
    "polarization": {
        "preset": "paper-like",
        "pressure_bar": 10.0,
        "dwell_s": 30.0,
        "linear_step_deg": 5.0,
        "circular_step_deg": 10.0,
        "periods": 2,
    },
    "analysis": {"pressure_gauge_rel_uncertainty": 0.01},
}

# keys whose value may be null or of a different type than the default
_FLEXIBLE = {
    ("dispersion_file",),
    ("anchors", "CARS", "pressure_bar"),
    ("anchors", "CSRS", "pressure_bar"),
    ("optics_transmission", "CARS"),
    ("optics_transmission", "CSRS"),
}


def _line_of(text, key):
    if not text:
        return None
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return None


def _where(path, text):
    dotted = ".".join(path)
    line = _line_of(text, path[-1]) if path else None
    return f"{dotted} (line {line})" if line else dotted


def _check(value, default, path, text):
    if tuple(path) in _FLEXIBLE:
        if isinstance(value, (dict, list)):
            raise ConfigError(f"{_where(path, text)}: expected a scalar or null")
        return
    if isinstance(default, dict):
        if not isinstance(value, dict):
            raise ConfigError(f"{_where(path, text)}: expected an object")
        for k, v in value.items():
            if k not in default:
                raise ConfigError(f"{_where(path + [k], text)}: unknown key")
            _check(v, default[k], path + [k], text)
    elif isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{_where(path, text)}: expected true/false, got {value!r}")
    elif isinstance(default, (int, float)):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{_where(path, text)}: expected a number, got {value!r}")
    elif isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{_where(path, text)}: expected a string, got {value!r}")
    elif isinstance(default, list):
        if not isinstance(value, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in value
        ):
            raise ConfigError(f"{_where(path, text)}: expected a list of numbers")


def merge(base, override):
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate(doc, text=None):
    _check(doc, DEFAULTS, [], text)
    return doc


def load_file(path):
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    try:
        validate(doc, text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return doc


def resolve(path=None, overrides=None, environ=None):
    """Merged configuration: defaults < file (explicit or $CSRSLAB_CONFIG) < overrides."""
    environ = os.environ if environ is None else environ
    path = path or environ.get(ENV_VAR) or None
    doc = copy.deepcopy(DEFAULTS)
    if path:
        doc = merge(doc, load_file(path))
    if overrides:
        validate(overrides)
        doc = merge(doc, overrides)
    return doc


def canonical(doc):
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def config_hash(doc):
    return hashlib.sha256(canonical(doc).encode("utf-8")).hexdigest()
