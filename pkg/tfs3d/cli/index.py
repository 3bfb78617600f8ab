"""`tfs3d index`: build a split manifest over existing block files."""

from __future__ import annotations

import argparse
import logging
from pathlib import Path

from tfs3d.data.splits import BENCHMARKS, get_benchmark
from tfs3d.errors import ConfigError
from tfs3d.services.episode_sampler import index_blocks

logger = logging.getLogger(__name__)

BLOCK_PATTERNS = ("*.pcb", "*.txt", "*.xyz")


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("index", parents=[common],
                                   help="index labeled blocks into a split manifest")
    parser.add_argument("blocks_dir")
    parser.add_argument("--benchmark", required=True, choices=sorted(BENCHMARKS))
    parser.add_argument("--fold", type=int, choices=[0, 1], default=0,
                        help="fold held out as unseen (test) classes")
    parser.add_argument("--threshold", type=int, default=100,
                        help="points of a class a block needs to be indexed for it")
    parser.add_argument("-o", "--output", help="manifest path (default: BLOCKS_DIR/manifest.json)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    root = Path(args.blocks_dir)
    if not root.is_dir():
        raise ConfigError(f"{root} is not a directory")
    benchmark = get_benchmark(args.benchmark)
    paths = sorted({p for pattern in BLOCK_PATTERNS for p in root.rglob(pattern)})
    output = Path(args.output) if args.output else root / "manifest.json"
    manifest = index_blocks(
        paths,
        class_names=benchmark.class_names,
        seen=benchmark.seen(args.fold),
        unseen=benchmark.unseen(args.fold),
        class_threshold=args.threshold,
        root=output.parent,
    )
    manifest.save(output)
    print(f"{benchmark.name} fold {args.fold}: {len(paths)} blocks, "
          f"{len(manifest.block_index)} classes indexed -> {output}")
    return 0
