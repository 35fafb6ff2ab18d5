"""Run configuration and its plain-text ``key=value`` echo."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import UsageError
from .fusion import FUSION_KINDS
from .timefreq import IMAGE_KINDS

EXO_ENCODER_KINDS = ("mlp", "transformer")


@dataclass(frozen=True)
class TrainConfig:
    seq_len: int = 120
    n_scales: int = 128
    patch_size: int = 8
    image_kind: str = "morlet"
    exo_encoder_kind: str = "transformer"
    fusion_kind: str = "bi"
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    ff_mult: int = 2
    dropout: float = 0.1
    revin_affine: bool = False
    relative_targets: bool = True
    batch_size: int = 32
    max_epochs: int = 200
    patience: int = 10
    learning_rate: float = 1e-3
    seed: int = 7
    # keep only the last N training windows (0 = all); for quick runs
    train_limit: int = 0

    def __post_init__(self):
        positive = ("seq_len", "n_scales", "patch_size", "d_model", "n_heads", "n_layers", "ff_mult", "batch_size", "max_epochs")
        for name in positive:
            if getattr(self, name) <= 0:
                raise UsageError(f"{name} must be positive, got {getattr(self, name)}")
        if self.seq_len < 2:
            raise UsageError(f"seq_len must be at least 2, got {self.seq_len}")
        if self.patience < 0 or self.train_limit < 0 or self.seed < 0:
            raise UsageError("patience, train_limit and seed must be non-negative")
        if not self.learning_rate > 0:
            raise UsageError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 <= self.dropout < 1.0:
            raise UsageError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.d_model % self.n_heads:
            raise UsageError(f"d_model {self.d_model} is not divisible by n_heads {self.n_heads}")
        _check_choice("image_kind", self.image_kind, IMAGE_KINDS)
        _check_choice("exo_encoder_kind", self.exo_encoder_kind, EXO_ENCODER_KINDS)
        _check_choice("fusion_kind", self.fusion_kind, FUSION_KINDS)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)}\n" for f in dataclasses.fields(self))

    @classmethod
    def from_text(cls, text: str, **overrides) -> "TrainConfig":
        values = parse_key_values(text)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(values)

    @classmethod
    def from_mapping(cls, values: dict) -> "TrainConfig":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in fields:
                raise UsageError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(key, raw, type(getattr(cls(), key)))
        return cls(**kwargs)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path, **overrides) -> "TrainConfig":
        return cls.from_text(Path(path).read_text(), **overrides)


def _check_choice(name, value, choices):
    if value not in choices:
        raise UsageError(f"{name} must be one of {', '.join(choices)}; got {value!r}")


def parse_key_values(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _coerce(key, raw, kind):
    if not isinstance(raw, str):
        return raw
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise UsageError(f"config key {key!r}: cannot parse {raw!r} as {kind.__name__}") from None
