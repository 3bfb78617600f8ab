"""Segmentation metrics and the support/query distribution diagnostics."""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from tfs3d.errors import EmptyEvaluation, InvalidArgument
from tfs3d.models.metrics import MetricAccumulator

logger = logging.getLogger(__name__)

DEFAULT_BINS = 32


@dataclass(frozen=True)
class MiouResult:
    value: float
    per_class: dict[int, float]
    # classes that were expected (or tallied) but never had a non-empty union
    excluded: list[int]


def confusion_matrix(pred: np.ndarray, truth: np.ndarray, n_classes: int) -> np.ndarray:
    """(n_classes x n_classes) counts, rows = truth, columns = prediction.

    Points with truth -1 are skipped.
    """
    pred = np.asarray(pred, dtype=np.int64).ravel()
    truth = np.asarray(truth, dtype=np.int64).ravel()
    if pred.shape != truth.shape:
        raise InvalidArgument(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    keep = truth >= 0
    pred, truth = pred[keep], truth[keep]
    if pred.size and (pred.min() < 0 or pred.max() >= n_classes or truth.max() >= n_classes):
        raise InvalidArgument(f"labels outside 0..{n_classes - 1}")
    flat = np.bincount(truth * n_classes + pred, minlength=n_classes * n_classes)
    return flat.reshape(n_classes, n_classes)


def accumulate(
    acc: MetricAccumulator,
    pred: np.ndarray,
    truth: np.ndarray,
    target_classes: Sequence[int],
) -> MetricAccumulator:
    """Tally one episode into `acc` (in place) and return it.

    pred and truth are (Q, M) in episode space; episode label i+1 maps back
    to dataset class target_classes[i]. Background (0) is not scored itself
    but its false predictions enlarge the target classes' unions.
    """
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise InvalidArgument(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    conf = confusion_matrix(pred, truth, len(target_classes) + 1)
    _tally_confusion(acc, conf, target_classes)
    return acc


def _tally_confusion(acc: MetricAccumulator, conf: np.ndarray,
                     target_classes: Sequence[int]) -> None:
    for i, cls in enumerate(target_classes, start=1):
        inter = int(conf[i, i])
        union = int(conf[i, :].sum() + conf[:, i].sum() - conf[i, i])
        acc.intersection[cls] = acc.intersection.get(cls, 0) + inter
        acc.union[cls] = acc.union.get(cls, 0) + union
        acc.support[cls] = acc.support.get(cls, 0) + int(conf[i, :].sum())
        if union > 0:
            acc.episode_iou_sum[cls] = acc.episode_iou_sum.get(cls, 0.0) + inter / union
            acc.episode_iou_count[cls] = acc.episode_iou_count.get(cls, 0) + 1
    acc.episodes += 1


def accumulate_confusions(
    records: Iterable[tuple[np.ndarray, Sequence[int]]],
) -> MetricAccumulator:
    """Rebuild an accumulator from stored (confusion matrix, target classes) pairs."""
    acc = MetricAccumulator()
    for conf, targets in records:
        _tally_confusion(acc, np.asarray(conf, dtype=np.int64), targets)
    return acc


def miou(
    acc: MetricAccumulator,
    per_episode: bool = False,
    classes: Iterable[int] | None = None,
) -> MiouResult:
    """Mean IoU over classes with a non-empty union.

    Global mode divides the summed intersections by the summed unions per
    class. With `per_episode` each class's IoU is the mean of its per-episode
    IoUs instead. `classes` names the expected classes so that never-seen
    ones show up in `excluded`.
    """
    expected = set(acc.classes) | set(classes or ())
    per_class: dict[int, float] = {}
    for cls in sorted(expected):
        if per_episode:
            count = acc.episode_iou_count.get(cls, 0)
            if count:
                per_class[cls] = acc.episode_iou_sum[cls] / count
        else:
            union = acc.union.get(cls, 0)
            if union > 0:
                per_class[cls] = acc.intersection.get(cls, 0) / union
    if not per_class:
        raise EmptyEvaluation("no class has a non-empty union; nothing to average")
    excluded = sorted(expected - set(per_class))
    if excluded:
        logger.warning("Classes excluded from mIoU (never encountered): %s", excluded)
    value = float(np.mean(list(per_class.values())))
    return MiouResult(value=value, per_class=per_class, excluded=excluded)


# ---------------------------------------------------------------------------
# KL diagnostics
# ---------------------------------------------------------------------------

def _smoothed_histograms(values: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                         bins: int) -> np.ndarray:
    """Per-channel histograms of values (P, C) on [lo, hi], +1 smoothed and normalized."""
    width = np.where(hi > lo, hi - lo, 1.0)
    idx = np.floor((values - lo) / width * bins).astype(np.int64)
    np.clip(idx, 0, bins - 1, out=idx)
    channels = values.shape[1]
    flat = idx + np.arange(channels) * bins
    counts = np.bincount(flat.ravel(), minlength=channels * bins).reshape(channels, bins)
    counts = counts.astype(np.float64) + 1.0
    return counts / counts.sum(axis=1, keepdims=True)


def kl_divergence_diagnostic(
    support_feats: np.ndarray, query_feats: np.ndarray, bins: int = DEFAULT_BINS
) -> float:
    """Mean over channels of KL(support || query).

    Both inputs are any shape (..., D). Each channel is histogrammed over the
    range shared by the two sets; constant channels contribute 0.
    """
    if bins < 1:
        raise InvalidArgument("bins must be >= 1")
    support = np.asarray(support_feats, dtype=np.float64)
    query = np.asarray(query_feats, dtype=np.float64)
    if support.shape[-1] != query.shape[-1]:
        raise InvalidArgument(
            f"support D={support.shape[-1]} differs from query D={query.shape[-1]}"
        )
    support = support.reshape(-1, support.shape[-1])
    query = query.reshape(-1, query.shape[-1])
    lo = np.minimum(support.min(axis=0), query.min(axis=0))
    hi = np.maximum(support.max(axis=0), query.max(axis=0))
    p = _smoothed_histograms(support, lo, hi, bins)
    q = _smoothed_histograms(query, lo, hi, bins)
    kl = (p * np.log(p / q)).sum(axis=1)
    kl[hi <= lo] = 0.0
    return float(max(kl.mean(), 0.0))


def prototype_kl(
    protos: np.ndarray,
    query_feats: np.ndarray,
    valid_mask: np.ndarray | None = None,
    bins: int = DEFAULT_BINS,
) -> float:
    """Mean KL between each prototype's channel-value distribution and the query's.

    A prototype row (D,) is treated as D samples; the query features (M, D)
    as M*D samples. Both are histogrammed over their shared value range and
    KL(prototype || query) is averaged over the valid classes.
    """
    protos = np.asarray(protos, dtype=np.float64)
    query = np.asarray(query_feats, dtype=np.float64).reshape(-1, 1)
    rows = range(protos.shape[0])
    if valid_mask is not None:
        rows = [i for i in rows if valid_mask[i]]
    values = [kl_divergence_diagnostic(protos[i].reshape(-1, 1), query, bins) for i in rows]
    if not values:
        raise InvalidArgument("no valid prototype rows")
    return float(np.mean(values))
