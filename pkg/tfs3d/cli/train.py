"""`tfs3d train`: episodic training of the prototype-adjustment module."""

from __future__ import annotations

import argparse
import csv
import logging
from pathlib import Path

from tfs3d.errors import ConfigError
from tfs3d.schemas.manifest import SplitManifest
from tfs3d.services.checkpoint import load_checkpoint, save_checkpoint
from tfs3d.services.episode_sampler import sample_train_episodes
from tfs3d.services.trainer import TrainingHistory, train

from .options import add_episode_flags, run_config_from_args

logger = logging.getLogger(__name__)

HISTORY_NAME = "loss_history.csv"


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("train", parents=[common],
                                   help="train on episodes over the seen classes")
    parser.add_argument("--manifest", help="split manifest (JSON)")
    parser.add_argument("--checkpoint", help="checkpoint file to write")
    parser.add_argument("--resume", help="checkpoint to continue from")
    parser.add_argument("--output-dir", help="directory for the loss history")
    parser.add_argument("--max-iters", type=int)
    parser.add_argument("--lr", type=float)
    add_episode_flags(parser)
    parser.set_defaults(handler=run)


def write_history(path: Path, history: TrainingHistory) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "loss", "lr"])
        for it, (loss, lr) in enumerate(zip(history.losses, history.learning_rates)):
            writer.writerow([it, repr(loss), repr(lr)])


def run(args: argparse.Namespace) -> int:
    cfg = run_config_from_args(args)
    if not cfg.paths.manifest or not cfg.paths.checkpoint:
        raise ConfigError("train needs both a manifest and a checkpoint path")
    manifest = SplitManifest.load(cfg.paths.manifest)
    episodes = sample_train_episodes(
        manifest, cfg.episodes.n_way, cfg.episodes.k_shot, cfg.episodes.n_queries,
        cfg.episodes.num_points, cfg.seed,
    )
    params = load_checkpoint(args.resume) if args.resume else None
    params, history = train(episodes, cfg.encoder, cfg.head, cfg.quest,
                            cfg.episodes.max_iters, params)
    save_checkpoint(cfg.paths.checkpoint, params)

    out = Path(cfg.paths.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_history(out / HISTORY_NAME, history)
    print(f"seed: {cfg.seed}")
    if history.losses:
        print(f"iterations: {len(history)}, first loss {history.losses[0]:.5f}, "
              f"last loss {history.losses[-1]:.5f}")
    return 0
