"""Experiment configuration: YAML schema, strict parsing and serialisation.

A config file is a YAML mapping::

    name: warmup-d3          # free-form label, echoed in outputs
    dim: 3                   # context dimension d
    horizon: 10000           # rounds T (0 allowed: empty run)
    delta: 0.05              # confidence for bound evaluation, in (0, 1)
    seed: 0                  # master seed
    trials: 1                # independent trials per run
    mc_samples: 10000        # Monte Carlo sample size for estimators
    learner:   {kind: john_linear, params: {}}
    adversary: {kind: eps_ball, params: {eps: 0.1}}
    oracle:    {kind: linear, params: {}}
    corruption: {flip_times: []}
    output: {dir: null, record_x_max: 100000, timing: false}
    sweep: {horizons: [], param: null, values: []}

Every key except ``dim``, ``horizon``, ``learner`` and ``adversary`` is
optional. Unknown keys anywhere raise :class:`ConfigError`.
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

OUT_ENV = "SMOOTHCUT_OUT"
DEFAULT_OUT = "smoothcut-out"


class ConfigError(ValueError):
    """The configuration file is missing, malformed or inconsistent."""


@dataclass
class ComponentSpec:
    kind: str
    params: dict = field(default_factory=dict)


@dataclass
class CorruptionSpec:
    flip_times: list = field(default_factory=list)


@dataclass
class OutputSpec:
    dir: Optional[str] = None
    record_x_max: int = 100_000
    timing: bool = False

    def resolved_dir(self) -> str:
        return self.dir or os.environ.get(OUT_ENV) or DEFAULT_OUT


@dataclass
class SweepSpec:
    """Grid for ``sweep``: horizons, and optionally values of one adversary parameter."""

    horizons: list = field(default_factory=list)
    param: Optional[str] = None
    values: list = field(default_factory=list)


@dataclass
class ExperimentConfig:
    dim: int
    horizon: int
    learner: ComponentSpec
    adversary: ComponentSpec
    oracle: Optional[ComponentSpec] = None
    name: str = "experiment"
    delta: float = 0.05
    seed: int = 0
    trials: int = 1
    mc_samples: int = 10_000
    corruption: CorruptionSpec = field(default_factory=CorruptionSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if self.horizon < 0:
            raise ConfigError("horizon must be >= 0")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.mc_samples < 1:
            raise ConfigError("mc_samples must be >= 1")
        if any(int(t) < 1 for t in self.corruption.flip_times):
            raise ConfigError("flip_times are 1-based rounds")
        if any(int(h) < 0 for h in self.sweep.horizons):
            raise ConfigError("sweep horizons must be >= 0")
        if self.sweep.values and not self.sweep.param:
            raise ConfigError("sweep.values given without sweep.param")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_NESTED = {
    "learner": ComponentSpec,
    "adversary": ComponentSpec,
    "oracle": ComponentSpec,
    "corruption": CorruptionSpec,
    "output": OutputSpec,
    "sweep": SweepSpec,
}
_INTS = {"dim", "horizon", "seed", "trials", "mc_samples", "record_x_max"}
_FLOATS = {"delta"}


def _coerce(path: str, key: str, value):
    if key in _INTS:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or float(value) != int(value):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return int(value)
    if key in _FLOATS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    return value


def _build(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{path or 'config'}: unknown key(s) {', '.join(map(str, unknown))}")
    missing = [n for n, f in known.items()
               if n not in data and f.default is dataclasses.MISSING
               and f.default_factory is dataclasses.MISSING]
    if missing:
        raise ConfigError(f"{path or 'config'}: missing key(s) {', '.join(missing)}")
    kwargs = {}
    for key, value in data.items():
        sub = f"{path}.{key}" if path else key
        if key in _NESTED and value is not None:
            kwargs[key] = _build(_NESTED[key], value, sub)
        elif key in ("params",):
            if value is None:
                value = {}
            if not isinstance(value, dict):
                raise ConfigError(f"{sub}: expected a mapping")
            kwargs[key] = dict(value)
        elif key in ("flip_times", "horizons", "values"):
            if not isinstance(value, list):
                raise ConfigError(f"{sub}: expected a list")
            kwargs[key] = list(value)
        else:
            kwargs[key] = _coerce(sub, key, value)
    if cls is ComponentSpec and not isinstance(kwargs.get("kind"), str):
        raise ConfigError(f"{path}.kind: expected a string")
    try:
        return cls(**kwargs)
    except ConfigError as err:
        raise ConfigError(f"{path or 'config'}: {err}") from None
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{path or 'config'}: {err}") from None


def config_from_dict(data: Any) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "")


def load_config(path) -> ExperimentConfig:
    """Parse and validate the YAML file at ``path``."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    except yaml.YAMLError as err:
        raise ConfigError(f"malformed YAML in {path}: {err}") from None
    return config_from_dict(data)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
