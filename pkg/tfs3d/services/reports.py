"""Evaluation report files.

- summary.txt: human-readable, seed first
- per_class.csv: class, intersection, union, iou
- episodes.jsonl: one JSON object per episode with its confusion matrix
"""

from __future__ import annotations

import csv
import json
import logging
from collections.abc import Iterable
from pathlib import Path

import numpy as np

from tfs3d.errors import ParseError
from tfs3d.models.metrics import MetricAccumulator
from tfs3d.services.metrics import MiouResult, accumulate_confusions
from tfs3d.services.pipeline import EpisodeRecord

logger = logging.getLogger(__name__)

SUMMARY_NAME = "summary.txt"
TABLE_NAME = "per_class.csv"
EPISODE_LOG_NAME = "episodes.jsonl"


def format_summary(
    result: MiouResult,
    acc: MetricAccumulator,
    seed: int,
    class_names: dict[int, str] | None = None,
    header: dict[str, object] | None = None,
) -> str:
    names = class_names or {}
    lines = [f"seed: {seed}"]
    for key, value in (header or {}).items():
        lines.append(f"{key}: {value}")
    lines.append(f"episodes: {acc.episodes}")
    lines.append(f"mIoU: {result.value:.4f}")
    lines.append("")
    lines.append(f"{'class':<20} {'iou':>8}")
    for cls, iou in result.per_class.items():
        lines.append(f"{names.get(cls, str(cls)):<20} {iou:>8.4f}")
    if result.excluded:
        lines.append("")
        lines.append("excluded (never encountered): "
                     + ", ".join(names.get(c, str(c)) for c in result.excluded))
    return "\n".join(lines) + "\n"


def write_class_table(path: str | Path, acc: MetricAccumulator, result: MiouResult,
                      class_names: dict[int, str] | None = None) -> None:
    names = class_names or {}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "intersection", "union", "iou"])
        for cls in acc.classes:
            iou = result.per_class.get(cls)
            writer.writerow([
                names.get(cls, str(cls)),
                acc.intersection.get(cls, 0),
                acc.union.get(cls, 0),
                "" if iou is None else f"{iou:.6f}",
            ])


def write_episode_log(path: str | Path, records: Iterable[EpisodeRecord]) -> None:
    with open(path, "w") as fh:
        for record in records:
            fh.write(json.dumps({
                "episode": record.index,
                "target_classes": list(record.target_classes),
                "confusion": np.asarray(record.confusion).tolist(),
                "source": record.source,
            }, sort_keys=True) + "\n")


def read_episode_log(path: str | Path) -> list[tuple[np.ndarray, list[int]]]:
    """(confusion, target classes) pairs from an episode log."""
    entries = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                entries.append((np.asarray(obj["confusion"], dtype=np.int64),
                                [int(c) for c in obj["target_classes"]]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"line {lineno}: {exc}", path=str(path)) from exc
    return entries


def accumulator_from_log(path: str | Path) -> MetricAccumulator:
    return accumulate_confusions(read_episode_log(path))


def write_reports(
    out_dir: str | Path,
    result: MiouResult,
    acc: MetricAccumulator,
    records: Iterable[EpisodeRecord],
    seed: int,
    class_names: dict[int, str] | None = None,
    header: dict[str, object] | None = None,
) -> str:
    """Write all three report files; returns the summary text."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = format_summary(result, acc, seed, class_names, header)
    (out / SUMMARY_NAME).write_text(summary)
    write_class_table(out / TABLE_NAME, acc, result, class_names)
    write_episode_log(out / EPISODE_LOG_NAME, records)
    logger.info("Reports written to %s", out)
    return summary
