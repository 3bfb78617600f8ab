"""`tfs3d encode`: features of one block as a record file."""

from __future__ import annotations

import argparse
import logging

import numpy as np

from tfs3d.services.block_io import read_block
from tfs3d.services.checkpoint import write_records
from tfs3d.services.encoder import encode
from tfs3d.services.episode_sampler import resample_cloud

from .options import run_config_from_args

logger = logging.getLogger(__name__)


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("encode", parents=[common],
                                   help="encode a block into a feature dump")
    parser.add_argument("block", help="block file (.pcb binary or text)")
    parser.add_argument("-o", "--output", required=True, help="feature dump to write")
    parser.add_argument("--num-points", type=int,
                        help="resample the block to this many points first")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    cfg = run_config_from_args(args)
    cloud = read_block(args.block)
    if args.num_points is not None:
        cloud = resample_cloud(cloud, args.num_points, np.random.default_rng(cfg.seed))
    encoded = encode(cloud, cfg.encoder)
    records = {"features": encoded.final.data, "coords": cloud.coords}
    if cloud.has_labels:
        records["labels"] = cloud.labels.astype(np.float64)
    write_records(args.output, records)
    rows, cols = encoded.final.data.shape
    logger.info("Encoded %s -> %s", args.block, args.output)
    print(f"seed: {cfg.seed}")
    print(f"features: {rows}x{cols}")
    return 0
