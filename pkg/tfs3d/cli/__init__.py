"""Command-line entry point: ``python -m tfs3d <command> ...``.

Exit codes: 0 success, 1 internal error, 2 invalid input or configuration.
"""

from __future__ import annotations

import argparse
import logging
import sys

from tfs3d import __version__
from tfs3d.config import settings
from tfs3d.errors import Tfs3dError

from . import encode, evaluate, index, segment, synth, train
from .options import common_parser

logger = logging.getLogger(__name__)

COMMANDS = (encode, segment, train, evaluate, synth, index)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INVALID = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tfs3d",
        description="Training-free few-shot point-cloud segmentation",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    common = common_parser()
    for command in COMMANDS:
        command.register(subparsers, common)
    return parser


def configure_logging(level: str | None) -> None:
    name = (level or settings.log_level).upper()
    numeric = logging.getLevelName(name)
    if not isinstance(numeric, int):
        raise argparse.ArgumentTypeError(f"unknown log level '{level}'")
    logging.basicConfig(level=numeric, format=settings.log_format, stream=sys.stderr, force=True)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        configure_logging(args.log_level)
    except argparse.ArgumentTypeError as exc:
        parser.error(str(exc))

    try:
        return args.handler(args)
    except (ValueError, OSError) as exc:
        # bad input: malformed files, invalid config, missing paths
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Tfs3dError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:
        logger.exception("Unexpected failure in '%s'", args.command)
        print(f"error: internal: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
