"""`tfs3d synth`: write a synthetic block dataset and its manifest."""

from __future__ import annotations

import argparse
import json
import logging
import tomllib
from pathlib import Path

from pydantic import ValidationError

from tfs3d.data.synthetic import default_dataset_spec
from tfs3d.errors import ConfigError
from tfs3d.schemas.synth import SynthDatasetSpec
from tfs3d.services.synth import MANIFEST_NAME, synth_dataset

logger = logging.getLogger(__name__)


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("synth", parents=[common],
                                   help="generate a synthetic labeled dataset")
    parser.add_argument("spec", nargs="?",
                        help="dataset spec (JSON or TOML); default: built-in 8-class palette")
    parser.add_argument("-o", "--output-dir", required=True)
    parser.add_argument("--blocks", type=int)
    parser.set_defaults(handler=run)


def load_spec(path: str | Path) -> SynthDatasetSpec:
    path = Path(path)
    try:
        text = path.read_text()
        raw = tomllib.loads(text) if path.suffix == ".toml" else json.loads(text)
        return SynthDatasetSpec.model_validate(raw)
    except OSError as exc:
        raise ConfigError(f"cannot read spec {path}: {exc}") from exc
    except (tomllib.TOMLDecodeError, json.JSONDecodeError, ValidationError) as exc:
        raise ConfigError(f"invalid spec {path}: {exc}") from exc


def run(args: argparse.Namespace) -> int:
    spec = load_spec(args.spec) if args.spec else default_dataset_spec()
    updates = {key: value for key, value in (("blocks", args.blocks), ("seed", args.seed))
               if value is not None}
    if updates:
        try:
            spec = SynthDatasetSpec.model_validate({**spec.model_dump(), **updates})
        except ValidationError as exc:
            raise ConfigError(f"invalid spec override: {exc}") from exc
    manifest = synth_dataset(spec, args.output_dir)
    print(f"seed: {spec.seed}")
    print(f"wrote {spec.blocks} blocks and {Path(args.output_dir) / MANIFEST_NAME}")
    for cls in sorted(manifest.block_index):
        print(f"  class {cls} ({manifest.class_names[cls]}): "
              f"{len(manifest.block_index[cls])} blocks")
    return 0
