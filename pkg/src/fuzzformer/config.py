"""Run configuration: every knob of the model, training, and windowing.

Defaults: 60-step look-back, 30-step horizon, 2 LSTM layers at width
128, 2 attention layers with 4 heads, a 2-D latent, 16 rules,
ARIX(4, 1, 1).  The CLI exposes one flag per field and writes the
resolved config next to every run's outputs.
"""

import json
from dataclasses import asdict, dataclass, fields

from .exceptions import ConfigError
from .losses import LossWeights


@dataclass
class RunConfig:
    lookback: int = 60
    horizon: int = 30
    channels: int = 4
    lstm_layers: int = 2
    hidden_width: int = 128
    mha_layers: int = 2
    attention_heads: int = 4
    latent_width: int = 2
    rules: int = 16
    ar_order: int = 4
    integration_order: int = 1
    exog_order: int = 1
    dropout_rate: float = 0.1
    attention_residual: bool = True
    weight_mse: float = 1.0
    weight_fcm: float = 0.1
    weight_overlap: float = 0.01
    weight_balance: float = 0.1
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 200
    seed: int = 42

    def validate(self) -> "RunConfig":
        positive = (
            "lookback", "horizon", "channels", "lstm_layers", "hidden_width",
            "mha_layers", "attention_heads", "latent_width", "rules",
            "ar_order", "batch_size",
        )
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.epochs < 0 or self.exog_order < 0:
            raise ConfigError("epochs and exog_order must be non-negative")
        if self.integration_order not in (0, 1):
            raise ConfigError(f"integration_order must be 0 or 1, got {self.integration_order}")
        if self.hidden_width % self.attention_heads != 0:
            raise ConfigError(
                f"hidden_width {self.hidden_width} must be divisible by "
                f"attention_heads {self.attention_heads}"
            )
        if self.lookback < self.ar_order + self.integration_order:
            raise ConfigError(
                f"lookback {self.lookback} too short to seed ARIX order "
                f"p={self.ar_order}, d={self.integration_order}"
            )
        if not 0.0 <= self.dropout_rate <= 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1], got {self.dropout_rate}")
        self.loss_weights()  # validates non-negativity
        return self

    def loss_weights(self) -> LossWeights:
        return LossWeights(
            mse=self.weight_mse,
            fcm=self.weight_fcm,
            overlap=self.weight_overlap,
            balance=self.weight_balance,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data).validate()

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        return cls.from_dict(data)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
