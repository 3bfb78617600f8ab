"""Configuration of the training-free encoder."""

import enum

from pydantic import BaseModel, ConfigDict, field_validator

from tfs3d.models.frequency import FrequencyDistribution


class PEMode(str, enum.Enum):
    none = "none"
    add = "add"
    multiply = "multiply"
    add_multiply = "add_multiply"


class EncoderConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    d: int = 15                 # initial frequency count; final width is 90 * d
    theta: float = 20.0         # log-linear base of the initial frequencies
    delta: float = 0.1          # variance of the Gaussian local frequencies
    alpha: float = 0.8          # coordinate weight against color
    k: int = 8                  # neighbors for local embedding and upsampling
    pe_mode: PEMode = PEMode.add_multiply
    use_color: bool = True
    initial_distribution: FrequencyDistribution = FrequencyDistribution.loglinear
    local_distribution: FrequencyDistribution = FrequencyDistribution.gaussian
    uniform_range: float = 0.55
    laplacian_scale: float = 0.22
    seed: int = 0
    normalize_coords: bool = True

    @field_validator("d", "k")
    @classmethod
    def validate_positive_int(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @field_validator("alpha")
    @classmethod
    def validate_alpha(cls, v: float) -> float:
        if not 0.0 <= v <= 1.0:
            raise ValueError("alpha must be between 0 and 1")
        return v

    @field_validator("theta", "delta", "uniform_range", "laplacian_scale")
    @classmethod
    def validate_dispersion(cls, v: float) -> float:
        if v <= 0.0:
            raise ValueError("must be > 0")
        return v

    @property
    def feature_dim(self) -> int:
        return 90 * self.d

    @property
    def min_points(self) -> int:
        return 8 * self.k

    def parameter_for(self, distribution: FrequencyDistribution) -> float:
        """The dispersion parameter configured for `distribution`."""
        return {
            FrequencyDistribution.loglinear: self.theta,
            FrequencyDistribution.gaussian: self.delta,
            FrequencyDistribution.uniform: self.uniform_range,
            FrequencyDistribution.laplacian: self.laplacian_scale,
        }[distribution]
