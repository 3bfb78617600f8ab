"""Seen/unseen split manifest stored as JSON next to the block files."""

from __future__ import annotations

from pathlib import Path

from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from tfs3d.errors import ConfigError


class SplitManifest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    class_names: dict[int, str]
    seen: list[int]
    unseen: list[int]
    # class id -> block paths holding at least `class_threshold` points of that class
    block_index: dict[int, list[str]] = {}
    class_threshold: int = 100
    # Directory that relative block paths are resolved against; not serialized
    root: str | None = None

    @field_validator("class_threshold")
    @classmethod
    def validate_threshold(cls, v: int) -> int:
        if v < 1:
            raise ValueError("class_threshold must be >= 1")
        return v

    @model_validator(mode="after")
    def validate_split(self) -> SplitManifest:
        overlap = set(self.seen) & set(self.unseen)
        if overlap:
            raise ValueError(f"seen and unseen classes overlap: {sorted(overlap)}")
        unknown = (set(self.seen) | set(self.unseen)) - set(self.class_names)
        if unknown:
            raise ValueError(f"split references unknown class ids: {sorted(unknown)}")
        return self

    def blocks_for(self, class_id: int) -> list[Path]:
        base = Path(self.root) if self.root else Path(".")
        return [base / p for p in self.block_index.get(class_id, [])]

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.model_dump_json(indent=2, exclude={"root"}) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> SplitManifest:
        path = Path(path)
        try:
            manifest = cls.model_validate_json(path.read_text())
        except ValueError as exc:
            raise ConfigError(f"invalid manifest {path}: {exc}") from exc
        return manifest.model_copy(update={"root": str(path.parent)})
