"""Flags shared by every subcommand and their mapping onto RunConfig keys."""

from __future__ import annotations

import argparse
from typing import Any

from tfs3d.models.frequency import FrequencyDistribution
from tfs3d.schemas.encoder import PEMode
from tfs3d.schemas.quest import CombineMode
from tfs3d.schemas.run import RunConfig, load_run_config

# flag destination -> dotted RunConfig key
OVERRIDES: dict[str, str] = {
    "seed": "seed",
    "threads": "threads",
    "d": "encoder.d",
    "theta": "encoder.theta",
    "delta": "encoder.delta",
    "alpha": "encoder.alpha",
    "k": "encoder.k",
    "pe_mode": "encoder.pe_mode",
    "freq_dist": "encoder.local_distribution",
    "initial_freq_dist": "encoder.initial_distribution",
    "use_color": "encoder.use_color",
    "normalize_coords": "encoder.normalize_coords",
    "gamma": "head.gamma",
    "pool_kernel": "quest.pool_kernel",
    "pool_stride": "quest.pool_stride",
    "fc_depth": "quest.fc_depth",
    "combine_mode": "quest.combine_mode",
    "use_fc": "quest.use_fc",
    "use_attention": "quest.use_attention",
    "lr": "quest.lr",
    "n_way": "episodes.n_way",
    "k_shot": "episodes.k_shot",
    "n_queries": "episodes.n_queries",
    "episodes_per_combination": "episodes.episodes_per_combination",
    "num_points": "episodes.num_points",
    "max_iters": "episodes.max_iters",
    "manifest": "paths.manifest",
    "checkpoint": "paths.checkpoint",
    "output_dir": "paths.output_dir",
}


def common_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    group = parser.add_argument_group("run configuration")
    group.add_argument("--config", help="JSON or TOML run configuration file")
    group.add_argument("--seed", type=int)
    group.add_argument("--threads", type=int, help="worker threads (default: TFS3D_THREADS)")
    group.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")

    enc = parser.add_argument_group("encoder")
    enc.add_argument("--d", type=int, help="initial frequency count (features: 90*d)")
    enc.add_argument("--theta", type=float)
    enc.add_argument("--delta", type=float)
    enc.add_argument("--alpha", type=float)
    enc.add_argument("--k", type=int)
    enc.add_argument("--pe-mode", choices=[m.value for m in PEMode])
    enc.add_argument("--freq-dist", choices=[f.value for f in FrequencyDistribution],
                     help="frequency distribution of the local layers")
    enc.add_argument("--initial-freq-dist", choices=[f.value for f in FrequencyDistribution],
                     help="frequency distribution of the initial embedding")
    enc.add_argument("--use-color", action=argparse.BooleanOptionalAction, default=None)
    enc.add_argument("--normalize-coords", action=argparse.BooleanOptionalAction, default=None)

    head = parser.add_argument_group("head and trainable module")
    head.add_argument("--gamma", type=float)
    head.add_argument("--pool-kernel", type=int)
    head.add_argument("--pool-stride", type=int)
    head.add_argument("--fc-depth", type=int, help="linear stages of the FC stack")
    head.add_argument("--combine-mode", choices=[m.value for m in CombineMode])
    head.add_argument("--use-fc", action=argparse.BooleanOptionalAction, default=None)
    head.add_argument("--use-attention", action=argparse.BooleanOptionalAction, default=None)
    return parser


def add_episode_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("episodes")
    group.add_argument("--n-way", type=int)
    group.add_argument("--k-shot", type=int)
    group.add_argument("--n-queries", type=int)
    group.add_argument("--num-points", type=int)


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides: dict[str, Any] = {
        dotted: getattr(args, dest) for dest, dotted in OVERRIDES.items() if hasattr(args, dest)
    }
    return load_run_config(args.config, overrides)
