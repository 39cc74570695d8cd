"""Scenario files: one YAML document holding world, poses and every config block."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from .dynamics import VehicleParams
from .mission import MissionConfig, PdGains
from .planners import PlannerConfig
from .smoothing import SmootherConfig
from .spatial_map import WorldSpec


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class BenchSettings:
    worlds: int = 100
    map_scans: int = 10
    breakdown_worlds: int = 10
    keep_out_radius: float = 1.5


@dataclass(frozen=True)
class ScenarioSpec:
    world: WorldSpec = field(default_factory=WorldSpec)
    cloud: str | None = None
    start: tuple = (6.0, 10.0, 10.0)
    goal: tuple = (14.0, 10.0, 10.0)
    seed: int = 0
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    smoother: SmootherConfig = field(default_factory=SmootherConfig)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    mission: MissionConfig = field(default_factory=MissionConfig)
    bench: BenchSettings = field(default_factory=BenchSettings)

    def load_world(self, keep_out=(), keep_out_radius: float = 0.0) -> np.ndarray:
        if self.cloud is not None:
            from .io import read_points

            return read_points(self.cloud)
        from .spatial_map import random_world

        return random_world(self.world, keep_out, keep_out_radius)

    def planner_config(self, **overrides) -> PlannerConfig:
        return dataclasses.replace(self.planner, **{"seed": self.seed, **overrides})

    def with_seed(self, seed: int) -> ScenarioSpec:
        return dataclasses.replace(self, seed=seed, world=dataclasses.replace(self.world, seed=seed))


# section name -> config class; nested dataclasses inside a section are listed here too
_SECTIONS = {
    "world": WorldSpec,
    "planner": PlannerConfig,
    "smoother": SmootherConfig,
    "vehicle": VehicleParams,
    "mission": MissionConfig,
    "bench": BenchSettings,
}
_NESTED = {("mission", "gains"): PdGains}
_EXCLUDED = {("planner", "seed")}


def _plain(value):
    if dataclasses.is_dataclass(value):
        return {f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, (tuple, list, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def scenario_to_dict(spec: ScenarioSpec) -> dict:
    d = _plain(spec)
    d["planner"].pop("seed")
    return d


def dump_scenario(spec: ScenarioSpec) -> str:
    return yaml.safe_dump(scenario_to_dict(spec), sort_keys=False)


def write_scenario(path, spec: ScenarioSpec) -> None:
    with open(path, "w") as fh:
        fh.write(dump_scenario(spec))


def _tupled(value):
    if isinstance(value, list):
        return tuple(_tupled(v) for v in value)
    return value


def _build(cls, data, section: str):
    if not isinstance(data, dict):
        raise ParseError(f"section '{section}' must be a mapping")
    names = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in names or (section, key) in _EXCLUDED:
            raise ValidationError(f"{section}.{key}", "unknown key")
        nested = _NESTED.get((section, key))
        kwargs[key] = _build(nested, value, f"{section}.{key}") if nested else _tupled(value)
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        bad = _guess_key(str(exc), kwargs) or section
        raise ValidationError(bad if "." in bad else f"{section}.{bad}" if bad != section else section, str(exc)) from exc


def _guess_key(message: str, kwargs: dict) -> str | None:
    for key in sorted(kwargs, key=len, reverse=True):
        if key in message:
            return key
    return None


def _vec3(value, key: str) -> tuple:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(key, "expected three numbers") from None
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ValidationError(key, "expected three finite numbers")
    return tuple(float(v) for v in arr)


def scenario_from_dict(data: dict, base_dir: str = ".") -> ScenarioSpec:
    if not isinstance(data, dict):
        raise ParseError("scenario must be a mapping")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            kwargs[key] = _build(_SECTIONS[key], value or {}, key)
        elif key in ("start", "goal"):
            kwargs[key] = _vec3(value, key)
        elif key == "seed":
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ValidationError("seed", "expected a non-negative integer")
            kwargs[key] = value
        elif key == "cloud":
            if value is not None:
                path = value if os.path.isabs(value) else os.path.join(base_dir, value)
                if not os.path.exists(path):
                    raise ValidationError("cloud", f"file not found: {path}")
                value = path
            kwargs[key] = value
        else:
            raise ValidationError(key, "unknown key")
    spec = ScenarioSpec(**kwargs)
    if "world" in kwargs and "seed" in kwargs and "seed" not in (data.get("world") or {}):
        spec = dataclasses.replace(spec, world=dataclasses.replace(spec.world, seed=spec.seed))
    return spec


def parse_scenario(path) -> ScenarioSpec:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read scenario {path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        raise ParseError(f"malformed scenario {path}: {exc}") from exc
    return scenario_from_dict(data if data is not None else {}, os.path.dirname(os.path.abspath(path)))
