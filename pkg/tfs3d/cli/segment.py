"""`tfs3d segment`: training-free (or adjusted) segmentation of one query block."""

from __future__ import annotations

import argparse
import logging

import numpy as np

from tfs3d.errors import EmptyEvaluation, InvalidArgument
from tfs3d.models.episode import Episode, remap_episode_labels
from tfs3d.models.metrics import MetricAccumulator
from tfs3d.services.block_io import export_predictions, read_block
from tfs3d.services.checkpoint import load_checkpoint
from tfs3d.services.episode_sampler import resample_cloud
from tfs3d.services.metrics import accumulate, miou
from tfs3d.services.pipeline import segment_episode
from tfs3d.tasks.parallel import resolve_threads

from .options import run_config_from_args

logger = logging.getLogger(__name__)


def _support_spec(value: str) -> tuple[int, str]:
    class_id, sep, path = value.partition(":")
    if not sep or not path:
        raise argparse.ArgumentTypeError(f"expected CLASS_ID:PATH, got '{value}'")
    try:
        return int(class_id), path
    except ValueError:
        raise argparse.ArgumentTypeError(f"class id '{class_id}' is not an integer") from None


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("segment", parents=[common],
                                   help="segment a query block from labeled support blocks")
    parser.add_argument("--support", type=_support_spec, action="append", required=True,
                        metavar="CLASS_ID:PATH",
                        help="labeled support block for a target class (repeat for K shots)")
    parser.add_argument("--query", required=True, help="query block")
    parser.add_argument("-o", "--output", required=True, help="text point file with predictions")
    parser.add_argument("--checkpoint", help="trained parameters; omit for training-free")
    parser.add_argument("--num-points", type=int)
    parser.add_argument("--background-id", type=int, default=-1,
                        help="id written for points predicted as background")
    parser.set_defaults(handler=run)


def group_support(specs: list[tuple[int, str]]) -> tuple[list[int], list[list[str]]]:
    """Class order of first appearance and the block paths of each class."""
    groups: dict[int, list[str]] = {}
    for class_id, path in specs:
        groups.setdefault(class_id, []).append(path)
    shots = {len(paths) for paths in groups.values()}
    if len(shots) != 1:
        raise InvalidArgument("every target class needs the same number of support blocks")
    return list(groups), list(groups.values())


def run(args: argparse.Namespace) -> int:
    cfg = run_config_from_args(args)
    targets, paths = group_support(args.support)
    rng = np.random.default_rng(cfg.seed)
    num_points = cfg.episodes.num_points

    support = [[resample_cloud(read_block(p), num_points, rng) for p in shots] for shots in paths]
    query_raw = resample_cloud(read_block(args.query), num_points, rng)
    episode = remap_episode_labels(Episode(
        n_way=len(targets), k_shot=len(paths[0]), support=support, query=[query_raw],
        target_classes=tuple(targets),
    ))

    params = load_checkpoint(cfg.paths.checkpoint) if cfg.paths.checkpoint else None
    result = segment_episode(episode, cfg.encoder, cfg.head, params, cfg.quest,
                             threads=resolve_threads(cfg.threads))
    predicted = result.predictions[0]

    # episode label i+1 -> dataset class targets[i]
    lookup = np.array([args.background_id, *targets], dtype=np.int64)
    export_predictions(args.output, query_raw, lookup[predicted])
    print(f"seed: {cfg.seed}")
    print(f"wrote {query_raw.num_points} predictions to {args.output}")

    query = episode.query[0]
    if query.has_labels:
        acc = accumulate(MetricAccumulator(), result.predictions, query.labels[None, :], targets)
        try:
            print(f"mIoU: {miou(acc).value:.4f}")
        except EmptyEvaluation:
            print("mIoU: n/a (no target points in the query)")
    return 0
