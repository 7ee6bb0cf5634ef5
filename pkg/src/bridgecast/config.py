"""Run configuration with a byte-stable JSON round trip."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import InvalidArgument

PRESETS = {"point": 0.0, "prob": 2.0}
PROB_DEFAULT_SAMPLES = 100


@dataclass
class RunConfig:
    data: str = ""
    lookback: int = 336
    horizon: int = 96
    label_len: int = 48
    steps: int = 50
    preset: str = "point"
    s: float | None = None
    samples: int | None = None
    width: int = 64
    emb_dim: int = 8
    epochs: int = 10
    batch: int = 32
    seed: int = 0
    loss: str = "mae"
    split: list = field(default_factory=lambda: [0.7, 0.1, 0.2])
    out: str = "run"
    lr_max: float = 1e-4
    lr_min: float = 5e-7
    ridge: float = 1e-3
    ema_decay: float = 0.995
    ema_interval: int = 8
    cond_init: str = "prior"
    freeze_conditioner: bool = False
    date_column: str | None = "auto"
    eval_stride: int = 1

    def __post_init__(self):
        self.split = [float(r) for r in self.split]
        self.validate()

    @property
    def effective_s(self) -> float:
        if self.preset in PRESETS:
            return PRESETS[self.preset]
        return float(self.s)

    @property
    def effective_samples(self) -> int:
        if self.samples is not None:
            return self.samples
        return 1 if self.effective_s == 0 else PROB_DEFAULT_SAMPLES

    def validate(self) -> None:
        if self.preset not in PRESETS and self.preset != "custom":
            raise InvalidArgument(f"preset must be point, prob or custom, got {self.preset!r}")
        if self.preset == "custom" and (self.s is None or self.s < 0):
            raise InvalidArgument("custom preset needs a non-negative --s")
        if self.preset in PRESETS and self.s is not None and self.s != PRESETS[self.preset]:
            raise InvalidArgument(f"preset {self.preset!r} fixes s={PRESETS[self.preset]}; use --preset custom")
        if self.effective_s == 0 and self.effective_samples != 1:
            raise InvalidArgument("the deterministic sampler (s = 0) takes exactly one sample")
        if self.effective_samples < 1:
            raise InvalidArgument("samples must be >= 1")
        if self.lookback < 1 or self.horizon < 1 or not 0 <= self.label_len < self.lookback:
            raise InvalidArgument("need lookback >= 1, horizon >= 1 and 0 <= label_len < lookback")
        if self.steps < 2:
            raise InvalidArgument("diffusion steps must be >= 2")
        if self.loss not in ("mae", "mse"):
            raise InvalidArgument(f"loss must be mae or mse, got {self.loss!r}")
        if self.epochs < 0 or self.batch < 1 or self.width < 1 or self.emb_dim < 2 or self.emb_dim % 2:
            raise InvalidArgument("invalid epochs/batch/width/emb_dim")
        if self.cond_init not in ("prior", "zeros"):
            raise InvalidArgument(f"cond_init must be prior or zeros, got {self.cond_init!r}")
        if len(self.split) != 3:
            raise InvalidArgument("split needs three ratios")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        raw = json.loads(text)
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise InvalidArgument(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_json(Path(path).read_text())

    def replace(self, **changes) -> "RunConfig":
        d = asdict(self)
        d.update(changes)
        return RunConfig(**d)
