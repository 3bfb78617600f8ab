from pydantic import BaseModel, ConfigDict, field_validator


class HeadConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    gamma: float = 400.0

    @field_validator("gamma")
    @classmethod
    def validate_gamma(cls, v: float) -> float:
        if v <= 0.0:
            raise ValueError("gamma must be > 0")
        return v
