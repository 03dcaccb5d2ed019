"""Root configuration tree: defaults, presets, files and dotted overrides."""
from __future__ import annotations

import json
import os
import typing
from dataclasses import dataclass, field, fields, is_dataclass, replace

import yaml

from .runtime import DEFAULT_RATES, PipelineConfig
from .sim.world import DIFFICULTIES, GOAL_DISTANCES

PRESET_DIR = os.path.join(os.path.dirname(__file__), "presets")
PRESETS = ("sim-tuned", "real-params")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BenchConfig:
    difficulties: tuple = DIFFICULTIES
    goals: tuple = GOAL_DISTANCES
    n_runs: int = 10
    jobs: int = 0  # 0 = all available cores

    def __post_init__(self):
        if self.n_runs < 1:
            raise ConfigError("n_runs must be >= 1")
        bad = set(self.difficulties) - set(DIFFICULTIES)
        if bad:
            raise ConfigError(f"unknown difficulties {sorted(bad)}")


@dataclass(frozen=True)
class RootConfig:
    name: str = "default"
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    # per-difficulty CSF rigidness; empty means the pipeline value everywhere
    rigidness_by_difficulty: dict = field(default_factory=dict)
    bench: BenchConfig = field(default_factory=BenchConfig)

    def __post_init__(self):
        bad = set(self.rigidness_by_difficulty) - set(DIFFICULTIES)
        if bad:
            raise ConfigError(f"unknown difficulties {sorted(bad)} in rigidness_by_difficulty")

    def pipeline_for(self, difficulty: str, mode: str | None = None) -> PipelineConfig:
        p = self.pipeline
        if mode is not None and mode != p.perception_mode:
            # rates follow the mode unless they were set explicitly
            rates = () if p.rates == DEFAULT_RATES[p.perception_mode] else p.rates
            p = replace(p, perception_mode=mode, rates=rates)
        r = self.rigidness_by_difficulty.get(difficulty)
        if r is not None:
            p = replace(p, csf=replace(p.csf, rigidness=int(r)))
        return p


def _coerce(tp, value, path: str):
    origin = typing.get_origin(tp)
    if is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected a mapping")
        return build(tp, value, path)
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if tp is tuple or origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list")
        return tuple(value)
    if tp is dict or origin is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected a mapping")
        return dict(value)
    return value


def build(cls, data: dict, path: str = ""):
    """Instantiate dataclass ``cls`` from a nested mapping, rejecting unknown keys."""
    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config key(s) {sorted(f'{path}{k}' for k in unknown)}")
    kwargs = {k: _coerce(hints[k], v, f"{path}{k}.") for k, v in data.items()}
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from exc


def to_dict(obj) -> dict:
    """Plain nested mapping of a config (tuples become lists)."""
    def conv(v):
        if is_dataclass(v):
            return {f.name: conv(getattr(v, f.name)) for f in fields(v)}
        if isinstance(v, (tuple, list)):
            return [conv(x) for x in v]
        if isinstance(v, dict):
            return {k: conv(x) for k, x in v.items()}
        return v
    return conv(obj)


def merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = v
    return out


def read_file(path: str) -> dict:
    with open(path) as fh:
        text = fh.read()
    data = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def preset_path(name: str) -> str:
    return os.path.join(PRESET_DIR, f"{name}.yaml")


def parse_override(item: str) -> dict:
    """``a.b.c=value`` into a nested mapping; the value is parsed as YAML."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} must look like key.path=value")
    key, raw = item.split("=", 1)
    value = yaml.safe_load(raw)
    out: dict = {}
    cur = out
    parts = key.strip().split(".")
    for p in parts[:-1]:
        cur = cur.setdefault(p, {})
    cur[parts[-1]] = value
    return out


def load(source: str | None = None, overrides=()) -> RootConfig:
    """Defaults, then a preset name or config file, then ``key.path=value`` overrides."""
    data: dict = {}
    if source:
        path = preset_path(source) if source in PRESETS else source
        if not os.path.exists(path):
            raise ConfigError(f"config {source!r} is neither a preset {PRESETS} nor a readable file")
        data = read_file(path)
    for item in overrides:
        data = merge(data, parse_override(item) if isinstance(item, str) else item)
    return build(RootConfig, data)
