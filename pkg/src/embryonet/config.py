"""Flat ``key = value`` experiment configuration."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path

from .autoencoder import EncoderSpec, desk_encoder_spec, full_encoder_spec
from .errors import ConfigError
from .sequence import SequenceHyper
from .synthdata import SyntheticConfig


@dataclass(frozen=True)
class ExperimentConfig:
    # synthetic data
    n_unlabeled: int = 800
    n_graded: int = 300
    n_kid: int = 272
    frames_per_video: int = 16
    frame_size: int = 32
    signal_strength: float = 10.0
    rater_noise_std: float = 1.0
    target_prevalence: float = 0.79
    pixel_noise_std: float = 0.03
    # autoencoder
    encoder: str = "desk"
    embedding_dim: int = 32
    ae_epochs: int = 8
    ae_batch_size: int = 16
    ae_lr: float = 1e-3
    ae_frames_per_video: int = 4
    # sequence model
    hidden_dim: int = 64
    grade_epochs: int = 30
    binary_epochs: int = 30
    batch_size: int = 32
    lr: float = 3e-3
    trunk_lr_scale: float = 0.1
    clip_norm: float = 5.0
    transfer_policy: str = "full-finetune"
    # evaluation
    folds: int = 10
    bootstrap_repetitions: int = 1000
    model_threshold: float = 0.5
    panel_threshold: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if self.encoder not in ("desk", "full"):
            raise ConfigError(f"encoder must be 'desk' or 'full', got {self.encoder!r}")
        if self.transfer_policy not in ("head-only", "full-finetune"):
            raise ConfigError(f"unknown transfer_policy {self.transfer_policy!r}")
        if self.ae_frames_per_video < 1:
            raise ConfigError("ae_frames_per_video must be >= 1")

    def synthetic(self, seed: int | None = None) -> SyntheticConfig:
        names = {f.name for f in fields(SyntheticConfig)}
        kwargs = {k: v for k, v in dataclasses.asdict(self).items() if k in names}
        kwargs["seed"] = self.seed if seed is None else seed
        return SyntheticConfig(**kwargs)

    def encoder_spec(self) -> EncoderSpec:
        if self.encoder == "full":
            return full_encoder_spec()
        return desk_encoder_spec(self.frame_size, self.embedding_dim)

    def grade_hyper(self) -> SequenceHyper:
        return SequenceHyper(self.hidden_dim, self.grade_epochs, self.batch_size, self.lr,
                             self.trunk_lr_scale, self.clip_norm)

    def binary_hyper(self) -> SequenceHyper:
        return dataclasses.replace(self.grade_hyper(), epochs=self.binary_epochs)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def _coerce(name: str, kind, raw: str):
    try:
        if kind in (int, "int"):
            return int(raw)
        if kind in (float, "float"):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind}") from None


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, types[key], raw)
    return dataclasses.replace(base or ExperimentConfig(), **values)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def dump_config(config: ExperimentConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in config.to_dict().items())
