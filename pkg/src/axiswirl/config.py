"""Run configuration: strict YAML parsing with unknown-key rejection."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any

import yaml

from .checks import InvariantConfig
from .initial import DataSpec
from .microscope import MicroscopeConfig
from .solver import SolverConfig


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending path."""


@dataclass
class GridConfig:
    nr: int = 64
    nz: int = 64
    r_max: float = 4.0
    z_min: float = -4.0
    z_max: float = 4.0


@dataclass
class OutputConfig:
    directory: str = "out"
    history_capacity: int = 0
    diagnostics_every: int = 1


@dataclass
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(cfl=0.4))
    data: DataSpec = field(default_factory=DataSpec)
    microscope: MicroscopeConfig = field(default_factory=MicroscopeConfig)
    invariants: InvariantConfig = field(default_factory=InvariantConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    sweep: dict[str, list] = field(default_factory=dict)


_SECTIONS = {
    "grid": GridConfig,
    "solver": SolverConfig,
    "data": DataSpec,
    "microscope": MicroscopeConfig,
    "invariants": InvariantConfig,
    "output": OutputConfig,
}


def _coerce(value: Any, typ: Any, path: str) -> Any:
    if value is None:
        return None
    origin = str(typ)
    if typ is float or "float" in origin:
        if isinstance(value, str):
            # YAML 1.1 reads bare scientific notation like 1e-3 as a string
            try:
                return float(value)
            except ValueError:
                raise ConfigError(f"{path}: expected a number, got {value!r}") from None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if typ is int or origin == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return int(value)
    if typ is str or origin == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if typ is bool or origin == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {value!r}")
        return value
    return value


def _build_section(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown key {path}.{key}")
        kwargs[key] = _coerce(value, known[key].type, f"{path}.{key}")
    if cls is SolverConfig and "dt" not in kwargs and "cfl" not in kwargs:
        kwargs["cfl"] = 0.4  # documented default time-step policy
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_config(text: str) -> RunConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("top level: expected a mapping of sections")
    kwargs: dict[str, Any] = {}
    for key, value in doc.items():
        if key == "sweep":
            if not isinstance(value, dict):
                raise ConfigError("sweep: expected a mapping of parameter paths to lists")
            for pkey, plist in value.items():
                if not isinstance(plist, list):
                    raise ConfigError(f"sweep.{pkey}: expected a list of values")
                section = pkey.split(".", 1)[0]
                if section not in _SECTIONS:
                    raise ConfigError(f"sweep.{pkey}: unknown section {section!r}")
            kwargs["sweep"] = value
            continue
        if key not in _SECTIONS:
            raise ConfigError(f"unknown key {key}")
        kwargs[key] = _build_section(_SECTIONS[key], value, key)
    # solver needs exactly one of dt/cfl; supply the default only if absent
    if "solver" not in kwargs:
        kwargs["solver"] = SolverConfig(cfl=0.4)
    return RunConfig(**kwargs)


def serialize_config(cfg: RunConfig) -> str:
    doc = {}
    for name, cls in _SECTIONS.items():
        section = getattr(cfg, name)
        doc[name] = dataclasses.asdict(section)
    if cfg.sweep:
        doc["sweep"] = cfg.sweep
    return yaml.safe_dump(doc, sort_keys=True)


def apply_override(cfg: RunConfig, path: str, value: Any) -> RunConfig:
    """Return a copy of cfg with one dotted-path field replaced (sweep support)."""
    section, _, key = path.partition(".")
    if section not in _SECTIONS or not key:
        raise ConfigError(f"bad override path {path!r}")
    current = getattr(cfg, section)
    known = {f.name: f for f in dataclasses.fields(current)}
    if key not in known:
        raise ConfigError(f"unknown key {path}")
    value = _coerce(value, known[key].type, path)
    new_section = dataclasses.replace(current, **{key: value})
    return dataclasses.replace(cfg, **{section: new_section})
