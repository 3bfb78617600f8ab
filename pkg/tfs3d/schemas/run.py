"""Merged run configuration: file (JSON or TOML) plus command-line overrides."""

from __future__ import annotations

import json
import tomllib
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from tfs3d.errors import ConfigError
from tfs3d.schemas.encoder import EncoderConfig
from tfs3d.schemas.head import HeadConfig
from tfs3d.schemas.quest import QuestConfig


class EpisodeSettings(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_way: int = 2
    k_shot: int = 1
    n_queries: int | None = None    # None means Q = N
    episodes_per_combination: int = 100
    num_points: int = 2048
    max_iters: int = 1000

    @field_validator("n_way", "k_shot", "episodes_per_combination", "num_points")
    @classmethod
    def validate_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @field_validator("n_queries")
    @classmethod
    def validate_queries(cls, v: int | None) -> int | None:
        if v is not None and v < 1:
            raise ValueError("n_queries must be >= 1")
        return v

    @field_validator("max_iters")
    @classmethod
    def validate_iters(cls, v: int) -> int:
        if v < 0:
            raise ValueError("max_iters must be >= 0")
        return v

    @property
    def queries(self) -> int:
        return self.n_queries if self.n_queries is not None else self.n_way


class PathSettings(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    manifest: str | None = None
    checkpoint: str | None = None
    output_dir: str = "runs"


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    encoder: EncoderConfig = EncoderConfig()
    head: HeadConfig = HeadConfig()
    quest: QuestConfig = QuestConfig()
    episodes: EpisodeSettings = EpisodeSettings()
    paths: PathSettings = PathSettings()
    seed: int = 0
    threads: int | None = None


def _read_config_file(path: Path) -> dict[str, Any]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        if path.suffix == ".toml":
            return tomllib.loads(text)
        return json.loads(text)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from exc


def _set_dotted(target: dict[str, Any], dotted: str, value: Any) -> None:
    *parents, leaf = dotted.split(".")
    node = target
    for part in parents:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"cannot override '{dotted}': '{part}' is not a section")
        node = child
    node[leaf] = value


def load_run_config(
    path: str | Path | None = None, overrides: dict[str, Any] | None = None
) -> RunConfig:
    """Build a RunConfig from an optional file, then apply dotted-key overrides.

    Overrides whose value is None are skipped so unset command-line flags do
    not clobber the file.
    """
    raw: dict[str, Any] = _read_config_file(Path(path)) if path is not None else {}
    for dotted, value in (overrides or {}).items():
        if value is not None:
            _set_dotted(raw, dotted, value)
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
