"""`tfs3d eval`: episodic mIoU over the unseen classes."""

from __future__ import annotations

import argparse
import logging

from tfs3d.errors import ConfigError
from tfs3d.schemas.manifest import SplitManifest
from tfs3d.services.checkpoint import load_checkpoint
from tfs3d.services.episode_sampler import sample_test_episodes
from tfs3d.services.metrics import miou
from tfs3d.services.pipeline import evaluate
from tfs3d.services.reports import write_reports
from tfs3d.tasks.parallel import resolve_threads

from .options import add_episode_flags, run_config_from_args

logger = logging.getLogger(__name__)


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("eval", parents=[common],
                                   help="evaluate mIoU on test episodes")
    parser.add_argument("--manifest", help="split manifest (JSON)")
    parser.add_argument("--checkpoint", help="trained parameters; omit for training-free")
    parser.add_argument("--output-dir", help="directory for the report files")
    parser.add_argument("--episodes-per-combination", type=int)
    parser.add_argument("--per-episode-iou", action="store_true",
                        help="average IoU per episode instead of over global counts")
    add_episode_flags(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    cfg = run_config_from_args(args)
    if not cfg.paths.manifest:
        raise ConfigError("eval needs a manifest")
    manifest = SplitManifest.load(cfg.paths.manifest)
    params = load_checkpoint(cfg.paths.checkpoint) if cfg.paths.checkpoint else None

    ep = cfg.episodes
    episodes = sample_test_episodes(
        manifest, ep.n_way, ep.k_shot, ep.queries, ep.episodes_per_combination,
        ep.num_points, cfg.seed,
    )
    result = evaluate(episodes, cfg.encoder, cfg.head, params, cfg.quest,
                      threads=resolve_threads(cfg.threads))
    score = miou(result.accumulator, per_episode=args.per_episode_iou, classes=manifest.unseen)
    summary = write_reports(
        cfg.paths.output_dir, score, result.accumulator, result.records, cfg.seed,
        manifest.class_names,
        header={
            "setting": f"{ep.n_way}-way {ep.k_shot}-shot",
            "model": "adjusted" if params is not None else "training-free",
            "iou averaging": "per-episode" if args.per_episode_iou else "global",
        },
    )
    print(summary, end="")
    return 0
