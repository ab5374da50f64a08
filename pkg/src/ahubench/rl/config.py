from __future__ import annotations

import math
from dataclasses import dataclass

from ahubench.errors import ConfigError


@dataclass(frozen=True)
class PpoConfig:
    total_timesteps: int = 300_000
    rollout_length: int = 2048
    minibatch_size: int = 64
    epochs_per_update: int = 10
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_ratio: float = 0.2
    learning_rate: float = 3e-4
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    max_grad_norm: float = 0.5
    control_interval_s: float = 60.0
    seed: int = 0
    hidden_sizes: tuple[int, ...] = (64, 64)
    init_log_std: float = 0.0
    adam_eps: float = 1e-5
    randomize_phase: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if not 0 < self.gamma <= 1:
            raise ConfigError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not 0 <= self.gae_lambda <= 1:
            raise ConfigError(f"gae_lambda must lie in [0, 1], got {self.gae_lambda}")
        if self.clip_ratio <= 0:
            raise ConfigError("clip_ratio must be > 0")
        for name in ("total_timesteps", "rollout_length", "minibatch_size", "epochs_per_update"):
            if int(getattr(self, name)) <= 0:
                raise ConfigError(f"{name} must be a positive integer")
        if self.rollout_length % self.minibatch_size:
            raise ConfigError(
                f"rollout_length ({self.rollout_length}) must be divisible by "
                f"minibatch_size ({self.minibatch_size})"
            )
        for name in ("learning_rate", "max_grad_norm", "control_interval_s", "adam_eps"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be finite and > 0, got {value}")
        if self.value_coef < 0 or self.entropy_coef < 0:
            raise ConfigError("loss coefficients must be >= 0")
        if not self.hidden_sizes or min(self.hidden_sizes) <= 0:
            raise ConfigError("hidden_sizes must be a non-empty list of positive widths")
