"""Hyperparameters and run-config files.

Run configs are YAML mappings holding :class:`TrainConfig` keys plus the
paths in :class:`RunConfig`.  Unknown keys are rejected.  ``GLGIN_OUT_DIR``
and ``GLGIN_SEED`` in the environment override ``out_dir`` and ``seed``.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from pathlib import Path

import yaml


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    batch_size: int = 16
    d_emb: int = 128
    d_lstm: int = 256
    d_attn: int | None = None  # None -> 2 * d_lstm
    gat_heads: int = 4
    gat_layers: int = 2
    window_size: int = 1
    use_local_graph: bool = True
    use_global_graph: bool = True
    teacher_force_intents: bool = False
    alpha: float = 1.0
    beta: float = 1.0
    learning_rate: float = 1e-3
    max_epochs: int = 100
    patience: int = 15
    seed: int = 0
    dropout: float = 0.4
    gat_dropout: float | None = 0.0  # None -> same as dropout
    gat_negative_slope: float = 0.2
    grad_clip: float | None = 5.0
    lowercase: bool = True
    train_baseline: bool = True
    baseline_slot_emb: int = 64

    def __post_init__(self):
        for name in ("batch_size", "d_emb", "d_lstm", "gat_heads", "gat_layers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.d_attn is not None and self.d_attn < 1:
            raise ConfigError("d_attn must be positive")
        if self.window_size < 0:
            raise ConfigError("window_size must be >= 0")
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            raise ConfigError("loss weights need alpha, beta >= 0 and alpha + beta > 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        if self.gat_dropout is not None and not 0.0 <= self.gat_dropout < 1.0:
            raise ConfigError("gat_dropout must be in [0, 1)")
        if (2 * self.d_lstm) % self.gat_heads:
            raise ConfigError("2 * d_lstm must be divisible by gat_heads")
        if self.patience < 0 or self.max_epochs < 1:
            raise ConfigError("need max_epochs >= 1 and patience >= 0")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


PRESETS = {
    "mixatis": dict(d_emb=128, gat_heads=4),
    "mixsnips": dict(d_emb=64, gat_heads=8),
}


def preset(name: str, **overrides) -> TrainConfig:
    try:
        base = dict(PRESETS[name.lower()])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    base.update(overrides)
    return TrainConfig.from_dict(base)


@dataclass
class RunConfig:
    train: TrainConfig
    train_path: Path
    dev_path: Path
    test_path: Path | None = None
    out_dir: Path = Path("runs/glgin")
    preset: str | None = None
    figures: bool = True


_RUN_KEYS = {"train_path", "dev_path", "test_path", "out_dir", "preset", "figures"}


def load_run_config(path, env=None) -> RunConfig:
    env = os.environ if env is None else env
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    with path.open("r", encoding="utf-8") as f:
        raw = yaml.safe_load(f) or {}
    if not isinstance(raw, dict):
        raise ConfigError("config file must be a key-value mapping")

    base_dir = path.parent
    run = {k: raw.pop(k) for k in list(raw) if k in _RUN_KEYS}
    name = run.get("preset")
    if "GLGIN_SEED" in env:
        raw["seed"] = int(env["GLGIN_SEED"])
    train = preset(name, **raw) if name else TrainConfig.from_dict(raw)

    def resolve(p):
        if p is None:
            return None
        p = Path(p)
        return p if p.is_absolute() else base_dir / p

    for key in ("train_path", "dev_path"):
        if key not in run:
            raise ConfigError(f"config is missing {key!r}")
    cfg = RunConfig(
        train=train,
        train_path=resolve(run["train_path"]),
        dev_path=resolve(run["dev_path"]),
        test_path=resolve(run.get("test_path")),
        out_dir=resolve(env.get("GLGIN_OUT_DIR", run.get("out_dir", "runs/glgin"))),
        preset=name,
        figures=bool(run.get("figures", True)),
    )
    for p in (cfg.train_path, cfg.dev_path, cfg.test_path):
        if p is not None and not p.is_file():
            raise ConfigError(f"dataset file not found: {p}")
    return cfg
