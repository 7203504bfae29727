"""Experiment configuration: one JSON-serializable object covering the
method list, environment, operator, training hyperparameters, and run sizes."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .env import AUTO2_THRESHOLDS, EnvConfig
from .nn import TrainSpec
from .scripted_operator import OperatorConfig


@dataclass(frozen=True)
class ExperimentConfig:
    methods: tuple[str, ...] = ("dipa",)
    seeds: tuple[int, ...] = (0,)
    iterations: int = 5  # demonstration/update rounds per run
    episodes_per_iteration: int = 10
    eval_episodes: int = 10
    output_dir: str = "runs/experiment"
    # Disturbance update flavor: False anchors the manual-step selection on the
    # demonstrated labels; True uses the literal predicted-mode extraction,
    # which requires a queryable operator.
    eq13_literal: bool = False
    env: EnvConfig = field(default_factory=EnvConfig)
    operator: OperatorConfig = field(default_factory=OperatorConfig)
    train: TrainSpec = field(default_factory=TrainSpec)

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.episodes_per_iteration < 1:
            raise ValueError("episodes_per_iteration must be >= 1")
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        if not self.methods:
            raise ValueError("methods must be nonempty")

    @property
    def label_source(self) -> str:
        return self.operator.label_source


def threshold_code(value: float) -> str | float:
    for code, v in AUTO2_THRESHOLDS.items():
        if v == value:
            return code
    return value


def _encode_threshold(value):
    return threshold_code(value)


def _decode_threshold(value) -> float:
    if isinstance(value, str):
        code = value.strip().upper()
        if code not in AUTO2_THRESHOLDS:
            raise ValueError(f"unknown threshold code {value!r}; expected one of {sorted(AUTO2_THRESHOLDS)}")
        return AUTO2_THRESHOLDS[code]
    return float(value)


def to_dict(config: ExperimentConfig) -> dict:
    obj = {
        "methods": list(config.methods),
        "seeds": list(config.seeds),
        "iterations": config.iterations,
        "episodes_per_iteration": config.episodes_per_iteration,
        "eval_episodes": config.eval_episodes,
        "output_dir": config.output_dir,
        "eq13_literal": config.eq13_literal,
        "env": asdict(config.env),
        "operator": asdict(config.operator),
        "train": asdict(config.train),
    }
    obj["env"]["auto2_threshold"] = _encode_threshold(config.env.auto2_threshold)
    obj["env"]["home"] = list(config.env.home)
    obj["operator"]["clamp"] = list(config.operator.clamp)
    return obj


def _sub_config(cls, obj: dict, name: str):
    known = {f.name for f in fields(cls)}
    unknown = set(obj) - known
    if unknown:
        raise ValueError(f"unknown {name} config keys: {sorted(unknown)}")
    return cls(**obj)


def from_dict(obj: dict) -> ExperimentConfig:
    obj = dict(obj)
    env_obj = dict(obj.pop("env", {}))
    if "auto2_threshold" in env_obj:
        env_obj["auto2_threshold"] = _decode_threshold(env_obj["auto2_threshold"])
    if "home" in env_obj:
        env_obj["home"] = tuple(env_obj["home"])
    op_obj = dict(obj.pop("operator", {}))
    if "clamp" in op_obj:
        op_obj["clamp"] = tuple(op_obj["clamp"])
    train_obj = dict(obj.pop("train", {}))
    top = {
        "methods": tuple(obj.pop("methods", ("dipa",))),
        "seeds": tuple(obj.pop("seeds", (0,))),
    }
    for key in ("iterations", "episodes_per_iteration", "eval_episodes", "output_dir", "eq13_literal"):
        if key in obj:
            top[key] = obj.pop(key)
    if obj:
        raise ValueError(f"unknown config keys: {sorted(obj)}")
    return ExperimentConfig(
        env=_sub_config(EnvConfig, env_obj, "env"),
        operator=_sub_config(OperatorConfig, op_obj, "operator"),
        train=_sub_config(TrainSpec, train_obj, "train"),
        **top,
    )


def load_config(path) -> ExperimentConfig:
    return from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(to_dict(config), indent=2) + "\n", encoding="utf-8")


def default_config_json() -> str:
    return json.dumps(to_dict(ExperimentConfig()), indent=2)


def with_env(config: ExperimentConfig, **env_updates) -> ExperimentConfig:
    return replace(config, env=replace(config.env, **env_updates))
