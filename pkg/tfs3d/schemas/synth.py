"""Descriptors for synthetic scenes and synthetic datasets."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, field_validator, model_validator


def _check_color(v: tuple[float, float, float]) -> tuple[float, float, float]:
    if any(c < 0.0 or c > 1.0 for c in v):
        raise ValueError("color channels must lie in [0, 1]")
    return v


class ClusterDescriptor(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    class_id: int
    center: tuple[float, float, float]
    extent: float
    color: tuple[float, float, float]
    budget: int

    @field_validator("color")
    @classmethod
    def validate_color(cls, v: tuple[float, float, float]) -> tuple[float, float, float]:
        return _check_color(v)

    @field_validator("extent")
    @classmethod
    def validate_extent(cls, v: float) -> float:
        if v < 0.0:
            raise ValueError("extent must be >= 0")
        return v

    @field_validator("budget")
    @classmethod
    def validate_budget(cls, v: int) -> int:
        if v < 1:
            raise ValueError("budget must be >= 1")
        return v


class SynthClass(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    class_id: int
    name: str
    center: tuple[float, float, float]
    extent: float = 0.1
    color: tuple[float, float, float]

    @field_validator("color")
    @classmethod
    def validate_color(cls, v: tuple[float, float, float]) -> tuple[float, float, float]:
        return _check_color(v)


class SynthDatasetSpec(BaseModel):
    """A family of synthetic blocks plus its seen/unseen split."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    classes: list[SynthClass]
    seen: list[int]
    unseen: list[int]
    blocks: int = 64
    classes_per_block: int = 3
    points_per_block: int = 2048
    noise: float = 0.5            # cluster spread as a fraction of each class extent
    center_jitter: float = 0.05   # uniform jitter of cluster centers per block
    color_noise: float = 0.0
    class_threshold: int = 100
    seed: int = 0

    @model_validator(mode="after")
    def validate_classes(self) -> SynthDatasetSpec:
        ids = [c.class_id for c in self.classes]
        if len(set(ids)) != len(ids):
            raise ValueError("class ids must be unique")
        if set(self.seen) & set(self.unseen):
            raise ValueError("seen and unseen classes overlap")
        if not 1 <= self.classes_per_block <= len(self.classes):
            raise ValueError("classes_per_block must be between 1 and the number of classes")
        if self.points_per_block < self.classes_per_block:
            raise ValueError("points_per_block must give every cluster at least one point")
        return self
