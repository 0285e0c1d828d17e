"""Flat ``key = value`` run configuration.

Precedence per key: explicit override (CLI flag) > config file > built-in
default. ``DYGPP_SEED`` fills ``train.seed`` when neither a flag nor the file
sets it.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from .model import ModelConfig
from .trainer import TrainConfig

SEED_ENV = "DYGPP_SEED"


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (section, attribute, parser)
KEYS = {
    "model.num_neighbors": ("model", "num_neighbors", int),
    "model.dim_node": ("model", "dim_node", int),
    "model.dim_edge": ("model", "dim_edge", int),
    "model.dim_time": ("model", "dim_time", int),
    "model.dim_channel": ("model", "dim_channel", int),
    "model.dim_embed": ("model", "dim_embed", int),
    "model.dim_out": ("model", "dim_out", int),
    "model.ffn_layers": ("model", "ffn_layers", int),
    "model.dropout": ("model", "dropout", float),
    "model.time_scale": ("model", "time_scale", float),
    "ablate.edge": ("model", "ablate_edge", _bool),
    "ablate.time": ("model", "ablate_time", _bool),
    "ablate.co": ("model", "ablate_co", _bool),
    "ablate.co_self": ("model", "ablate_co_self", _bool),
    "ablate.co_cross": ("model", "ablate_co_cross", _bool),
    "head.literal_eq11": ("model", "literal_head", _bool),
    "batch.time_gap_seconds": ("train", "time_gap", float),
    "train.learning_rate": ("train", "learning_rate", float),
    "train.max_epochs": ("train", "max_epochs", int),
    "train.patience": ("train", "patience", int),
    "train.seed": ("train", "seed", int),
    "split.inductive_fraction": ("split", "inductive_fraction", float),
    "split.seed": ("split", "seed", int),
}


@dataclass
class SplitConfig:
    inductive_fraction: float = 0.1
    seed: int = 0
    ratios: tuple[float, float, float] = (0.7, 0.15, 0.15)


@dataclass
class RunConfig:
    model: ModelConfig
    train: TrainConfig
    split: SplitConfig

    def to_text(self) -> str:
        """Serialize every key; the output parses back to an equal config."""
        sections = {"model": self.model, "train": self.train, "split": self.split}
        lines = []
        for key, (section, attr, parser) in KEYS.items():
            value = getattr(sections[section], attr)
            text = str(value).lower() if parser is _bool else repr(value)
            lines.append(f"{key} = {text}")
        return "\n".join(lines) + "\n"


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def read_config_file(path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, str(path))


def resolve(file_values: dict[str, str] | None = None, overrides: dict[str, object] | None = None,
            environ=None) -> RunConfig:
    """Merge layers into typed configs. ``overrides`` values of ``None`` are ignored."""
    environ = os.environ if environ is None else environ
    merged: dict[str, object] = {}
    env_seed = environ.get(SEED_ENV)
    if env_seed not in (None, ""):
        merged["train.seed"] = env_seed
    merged.update(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})

    sections: dict[str, dict] = {"model": {}, "train": {}, "split": {}}
    for key, raw in merged.items():
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        section, attr, parser = KEYS[key]
        try:
            sections[section][attr] = parser(raw) if isinstance(raw, str) else raw
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    try:
        return RunConfig(ModelConfig(**sections["model"]), TrainConfig(**sections["train"]),
                         SplitConfig(**sections["split"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_run_config(path=None, overrides: dict[str, object] | None = None, environ=None) -> RunConfig:
    return resolve(read_config_file(path) if path else None, overrides, environ)
