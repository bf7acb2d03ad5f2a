"""Experiment configuration: TOML-subset files plus key=value overrides.

The config surface is a flat table of scalars and arrays, with one
[[wavepacket]] table per packet.  Every key is schema-checked before any
computation; unknown keys are rejected.  This module stays free of
numpy so the CLI can fix the thread count before the numerics load.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Any, Optional

import tomli

__all__ = ["ConfigError", "ExperimentConfig", "EXPERIMENTS", "load_config", "echo_toml"]


class ConfigError(ValueError):
    """Invalid configuration; the CLI maps this to exit code 2."""


EXPERIMENTS = (
    "single-qumode",
    "propagator",
    "scattering",
    "degenerate-check",
    "oracle-compare",
)

# key -> (type, default, validator); float fields accept ints too
_SCHEMA = {
    "outdir": (str, "run-output", None),
    "seed": (int, 0, None),
    "threads": (int, 0, lambda v: v >= 0),
    "n_sites": (int, 200, lambda v: v >= 1),
    "spacing": (float, 1.0, lambda v: v > 0),
    "mass": (float, 1.0, lambda v: v > 0),
    "coupling": (float, 0.0, lambda v: v >= 0),
    "dt": (float, 0.01, lambda v: v > 0),
    "total_time": (float, 80.0, lambda v: v >= 0),
    "record_stride": (int, 100, lambda v: v >= 1),
    "m_points": (int, 200, lambda v: v >= 2),
    "extent": (float, 20.0, lambda v: v > 0),
    "l_trunc": (int, 80, lambda v: v >= 0),
    "epsilon": (float, 0.1, None),
    "times": (list, [100.0, 200.0, 300.0, 400.0], None),
    "initial_displacement": (float, 0.0, None),
    "impulse_site": (int, -1, None),
    "impulse_amplitude": (float, 1.0, None),
    "impulse_quadrature": (str, "position", lambda v: v in ("position", "momentum")),
    "displacement": (float, 1.0, None),
    "fock_cutoff": (int, 12, lambda v: v >= 1),
    "dt_halvings": (int, 2, lambda v: v >= 0),
    "write_psi": (bool, False, None),
}

_WAVEPACKET_SCHEMA = {
    "center": (float, None, None),
    "momentum": (float, None, None),
    "sigma": (float, None, lambda v: v > 0),
    "amplitude": (float, 1.0, None),
}

# experiment-specific defaults layered over the global ones
_EXPERIMENT_DEFAULTS = {
    "single-qumode": {"total_time": 400.0},
    "propagator": {"n_sites": 200, "total_time": 80.0},
    "scattering": {"n_sites": 500, "total_time": 350.0},
    "degenerate-check": {"n_sites": 32, "coupling": 0.8, "total_time": 100.0},
    "oracle-compare": {"n_sites": 2, "total_time": 1.0, "record_stride": 1},
}


@dataclass
class ExperimentConfig:
    experiment: str
    values: dict = dc_field(default_factory=dict)
    wavepackets: list = dc_field(default_factory=list)

    def __getattr__(self, name: str) -> Any:
        if name.startswith("_") or name in ("experiment", "values", "wavepackets"):
            raise AttributeError(name)
        try:
            return self.values[name]
        except KeyError:
            raise AttributeError(name) from None


def _coerce(key: str, value: Any, want: type) -> Any:
    if want is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if want is list:
        if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"config key '{key}' must be an array of numbers")
        return [float(v) for v in value]
    if not isinstance(value, want) or (want is not bool and isinstance(value, bool)):
        raise ConfigError(
            f"config key '{key}' must be {want.__name__}, got {type(value).__name__}"
        )
    return value


def _validate_wavepacket(idx: int, table: Any) -> dict:
    if not isinstance(table, dict):
        raise ConfigError(f"[[wavepacket]] entry {idx} is not a table")
    unknown = set(table) - set(_WAVEPACKET_SCHEMA)
    if unknown:
        raise ConfigError(f"unknown wavepacket keys: {sorted(unknown)}")
    out = {}
    for key, (want, default, check) in _WAVEPACKET_SCHEMA.items():
        if key in table:
            val = _coerce(f"wavepacket.{key}", table[key], want)
        elif default is not None:
            val = default
        else:
            raise ConfigError(f"wavepacket entry {idx} is missing required key '{key}'")
        if check is not None and not check(val):
            raise ConfigError(f"wavepacket key '{key}' has invalid value {val!r}")
        out[key] = val
    return out


def parse_override(text: str) -> tuple[str, Any]:
    """Parse a command-line 'key=value' override.

    The value is read with TOML literal semantics where possible
    (numbers, booleans, quoted strings, arrays), falling back to a bare
    string.
    """
    if "=" not in text:
        raise ConfigError(f"override '{text}' is not of the form key=value")
    key, _, raw = text.partition("=")
    key = key.strip()
    raw = raw.strip()
    if not key:
        raise ConfigError(f"override '{text}' has an empty key")
    try:
        value = tomli.loads(f"v = {raw}")["v"]
    except tomli.TOMLDecodeError:
        value = raw
    return key, value


def load_config(
    experiment: str,
    path: Optional[str] = None,
    overrides: Optional[list[str]] = None,
) -> ExperimentConfig:
    """Resolve defaults, config file and overrides into a checked config."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment '{experiment}'; choose from {EXPERIMENTS}")
    resolved = {k: default for k, (_, default, _) in _SCHEMA.items()}
    resolved.update(_EXPERIMENT_DEFAULTS.get(experiment, {}))

    file_data: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                file_data = tomli.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid TOML: {exc}") from None

    wavepackets_raw = file_data.pop("wavepacket", [])
    if not isinstance(wavepackets_raw, list):
        raise ConfigError("'wavepacket' must be given as [[wavepacket]] tables")

    unknown = set(file_data) - set(_SCHEMA)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key, value in file_data.items():
        resolved[key] = _coerce(key, value, _SCHEMA[key][0])

    for text in overrides or []:
        key, value = parse_override(text)
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key in override: '{key}'")
        resolved[key] = _coerce(key, value, _SCHEMA[key][0])

    for key, (_, _, check) in _SCHEMA.items():
        if check is not None and not check(resolved[key]):
            raise ConfigError(f"config key '{key}' has invalid value {resolved[key]!r}")

    packets = [_validate_wavepacket(i, t) for i, t in enumerate(wavepackets_raw)]
    return ExperimentConfig(experiment=experiment, values=resolved, wavepackets=packets)


def _toml_scalar(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, list):
        return "[" + ", ".join(_toml_scalar(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value)} to TOML")


def echo_toml(config: ExperimentConfig) -> str:
    """Serialize the resolved configuration back to TOML text."""
    lines = [f"# resolved configuration for experiment '{config.experiment}'"]
    for key in sorted(config.values):
        lines.append(f"{key} = {_toml_scalar(config.values[key])}")
    for packet in config.wavepackets:
        lines.append("")
        lines.append("[[wavepacket]]")
        for key in ("center", "momentum", "sigma", "amplitude"):
            lines.append(f"{key} = {_toml_scalar(packet[key])}")
    return "\n".join(lines) + "\n"
