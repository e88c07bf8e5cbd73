"""Run configuration: a JSON document with a flat ``model`` block and one
block per command.  Unknown keys are rejected at every level."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Optional

from .model import PARAM_NAMES, ModelParams


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclass
class OdeConfig:
    system: str = "full"
    init: Optional[list[float]] = None
    t_max: float = 50.0
    samples: int = 201
    rtol: float = 1e-9
    atol: float = 1e-12
    converge: bool = False
    match_tol: float = 1e-6
    t_cap: float = 1e4


@dataclass
class StopConfig:
    mutant: int = 0
    extinction: bool = False
    level: Optional[int] = None
    sets: list[str] = field(default_factory=list)
    beta: float = 0.05


@dataclass
class SsaConfig:
    K: int = 1000
    init: Optional[list[int]] = None
    t_cap: float = 100.0
    event_cap: int = 10**9
    record_dt: Optional[float] = 0.1
    stop: StopConfig = field(default_factory=StopConfig)


@dataclass
class InvadeConfig:
    direction: str = "2into1"
    K: list[int] = field(default_factory=lambda: [1000])
    trials: int = 100
    beta: float = 0.05
    t_cap: Optional[float] = None
    event_cap: int = 10**9


@dataclass
class GridConfig:
    start: float = 0.05
    stop: float = 8.0
    num: int = 80


@dataclass
class RegimeMapConfig:
    lambda1: GridConfig = field(default_factory=lambda: GridConfig(1.0, 8.0, 71))
    lambda2: GridConfig = field(default_factory=lambda: GridConfig(0.05, 8.0, 80))


@dataclass
class BranchingConfig:
    verify_mc: int = 0
    survival_threshold: Optional[int] = None


@dataclass
class RunConfig:
    model: dict[str, float] = field(default_factory=dict)
    seed: int = 0
    threads: int = 1
    ode: OdeConfig = field(default_factory=OdeConfig)
    ssa: SsaConfig = field(default_factory=SsaConfig)
    invade: InvadeConfig = field(default_factory=InvadeConfig)
    regime_map: RegimeMapConfig = field(default_factory=RegimeMapConfig)
    branching: BranchingConfig = field(default_factory=BranchingConfig)

    def params(self) -> ModelParams:
        return ModelParams.from_dict(self.model)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        cfg = _build(cls, data, "config")
        unknown = set(cfg.model) - set(PARAM_NAMES)
        if unknown:
            raise ConfigError(f"unknown model keys: {sorted(unknown)}")
        for k, v in cfg.model.items():
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"model.{k} must be a number")
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    kwargs = {}
    defaults = cls()
    for name, value in data.items():
        current = getattr(defaults, name)
        if is_dataclass(current):
            kwargs[name] = _build(type(current), value, f"{where}.{name}")
        else:
            kwargs[name] = value
    return cls(**kwargs)
