"""Configuration of the trainable prototype-adjustment module and its optimizer."""

import enum

from pydantic import BaseModel, ConfigDict, field_validator


class CombineMode(str, enum.Enum):
    mean = "mean"
    sum = "sum"


class QuestConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    pool_kernel: int = 32
    pool_stride: int = 32
    fc_depth: int = 2               # linear stages after the leading norm + ReLU
    combine_mode: CombineMode = CombineMode.mean
    use_fc: bool = True
    use_attention: bool = True
    norm_eps: float = 1e-5

    # AdamW
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-2
    lr_halve_every: int = 7000

    seed: int = 0
    log_every: int = 50

    @field_validator("pool_kernel", "pool_stride", "lr_halve_every", "log_every")
    @classmethod
    def validate_positive_int(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @field_validator("fc_depth")
    @classmethod
    def validate_depth(cls, v: int) -> int:
        if v < 0:
            raise ValueError("fc_depth must be >= 0")
        return v

    @field_validator("lr", "weight_decay")
    @classmethod
    def validate_non_negative(cls, v: float) -> float:
        if v < 0.0:
            raise ValueError("must be >= 0")
        return v

    @field_validator("beta1", "beta2")
    @classmethod
    def validate_beta(cls, v: float) -> float:
        if not 0.0 <= v < 1.0:
            raise ValueError("betas must lie in [0, 1)")
        return v

    def pooled_length(self, num_points: int) -> int:
        """M' for a cloud of `num_points` points."""
        return -(-num_points // self.pool_stride)
