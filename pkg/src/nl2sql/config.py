"""Run configuration: a flat TOML file mirroring TrainConfig fields.

Unknown keys are rejected so typos fail loudly.  All randomness in a run
flows from the single ``seed``.
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    d: int = 64  # model width; also the table/column embedding size
    layers: int = 2  # encoder and decoder depth
    heads: int = 2
    d_ff: int = 128
    d_k: int = 0  # 0 = d // heads
    d_v: int = 0  # 0 = d // heads
    k1: int = 4  # tables kept by the selection head
    k2: int = 4  # columns kept by the selection head
    window: int = 30  # adjacency window over previous BFS nodes
    max_nodes: int = 200  # generation budget
    max_input_len: int = 1024
    gat_layers: int = 2
    batch_size: int = 8
    max_steps: int = 2000
    learning_rate: float = 5e-4
    warmup_steps: int = 500
    grad_clip: float = 1.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    lambda_sel: float = 0.2  # weight of the auxiliary selection loss
    beam_width: int = 4
    seed: int = 0
    eval_interval: int = 250
    checkpoint_interval: int = 1000
    early_stop_em: float = 1.0  # stop once train-slice EM reaches this; >1 disables

    def __post_init__(self):
        if self.d_k == 0:
            self.d_k = self.d // self.heads
        if self.d_v == 0:
            self.d_v = self.d // self.heads
        self.validate()

    def validate(self) -> None:
        positive = (
            "d layers heads d_ff d_k d_v k1 k2 window max_nodes max_input_len "
            "gat_layers batch_size max_steps warmup_steps beam_width "
            "eval_interval checkpoint_interval"
        ).split()
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("learning_rate", "grad_clip", "adam_eps"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.lambda_sel < 0:
            raise ConfigError("lambda_sel must be >= 0")
        if self.d % self.heads:
            raise ConfigError("d must be divisible by heads")

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path: str | Path) -> TrainConfig:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    known = {f.name for f in fields(TrainConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return TrainConfig(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
