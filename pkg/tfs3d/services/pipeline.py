"""End-to-end episode processing: encode, (optionally) adjust, segment, score."""

from __future__ import annotations

import logging
from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np

from tfs3d.errors import InvalidEpisode, QuestError
from tfs3d.models.episode import Episode
from tfs3d.models.metrics import MetricAccumulator
from tfs3d.models.point_cloud import PointCloud
from tfs3d.schemas.encoder import EncoderConfig
from tfs3d.schemas.head import HeadConfig
from tfs3d.schemas.quest import QuestConfig
from tfs3d.services.encoder import encode
from tfs3d.services.fewshot_head import compute_prototypes, cosine_scores, predict
from tfs3d.services.metrics import accumulate, confusion_matrix
from tfs3d.services.quest import QuestParameters, check_parameters, quest_adjust
from tfs3d.tasks.parallel import ordered_imap, ordered_map, resolve_threads

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EpisodeFeatures:
    support_feats: np.ndarray            # (N, K, M, D)
    support_labels: np.ndarray           # (N, K, M) episode space
    query_feats: np.ndarray              # (Q, M, D)
    query_labels: np.ndarray | None      # (Q, M) episode space, None if unlabeled


@dataclass(frozen=True, eq=False)
class SegmentationResult:
    predictions: np.ndarray              # (Q, M) episode labels
    scores: np.ndarray                   # (Q, M, N+1) cosine scores
    prototypes: np.ndarray               # (Q, N+1, D) prototypes the queries were scored against
    valid_mask: np.ndarray


@dataclass
class EpisodeRecord:
    """Per-episode outcome kept for the evaluation log."""
    index: int
    target_classes: tuple[int, ...]
    confusion: np.ndarray
    source: dict = field(default_factory=dict)


@dataclass
class EvaluationResult:
    accumulator: MetricAccumulator
    records: list[EpisodeRecord]


def encode_clouds(clouds: list[PointCloud], cfg: EncoderConfig,
                  threads: int | None = 1) -> list[np.ndarray]:
    return ordered_map(lambda cloud: encode(cloud, cfg).final.data, clouds, threads)


def encode_episode(episode: Episode, cfg: EncoderConfig, threads: int | None = 1) -> EpisodeFeatures:
    """Frozen-encoder features for every cloud of a remapped episode."""
    if not episode.remapped:
        raise InvalidEpisode("episode labels must be remapped into episode space first")
    clouds = episode.support_flat + list(episode.query)
    sizes = {c.num_points for c in clouds}
    if len(sizes) != 1:
        raise InvalidEpisode(
            f"all clouds of an episode must have the same point count, got {sorted(sizes)}"
        )
    feats = encode_clouds(clouds, cfg, threads)

    n, k = episode.n_way, episode.k_shot
    support = np.stack(feats[: n * k]).reshape(n, k, *feats[0].shape)
    support_labels = np.stack([c.labels for c in episode.support_flat]).reshape(n, k, -1)
    query = np.stack(feats[n * k:])
    query_labels = (
        np.stack([q.labels for q in episode.query]) if episode.queries_labeled else None
    )
    return EpisodeFeatures(support, support_labels, query, query_labels)


def segment_features(
    features: EpisodeFeatures,
    head_cfg: HeadConfig,
    params: QuestParameters | None = None,
    quest_cfg: QuestConfig | None = None,
) -> SegmentationResult:
    """Training-free head, or the trainable variant when `params` is given."""
    if params is None:
        protos = compute_prototypes(features.support_feats, features.support_labels)
        scores = cosine_scores(features.query_feats, protos)
        per_query = np.broadcast_to(
            protos.prototypes, (features.query_feats.shape[0],) + protos.prototypes.shape
        )
        valid = protos.valid_mask
    else:
        if quest_cfg is None:
            raise QuestError("quest_cfg is required together with params")
        check_parameters(params, features.query_feats.shape[-1],
                         quest_cfg.pooled_length(features.query_feats.shape[1]), quest_cfg)
        trace = quest_adjust(features.support_feats, features.support_labels,
                             features.query_feats, params, quest_cfg)
        valid = trace.prototypes.valid_mask
        scores = cosine_scores(trace.query_fc, trace.adjusted, valid)
        per_query = trace.adjusted
    _, labels = predict(scores, head_cfg)
    return SegmentationResult(predictions=labels, scores=scores,
                              prototypes=np.asarray(per_query), valid_mask=valid)


def segment_episode(
    episode: Episode,
    encoder_cfg: EncoderConfig,
    head_cfg: HeadConfig,
    params: QuestParameters | None = None,
    quest_cfg: QuestConfig | None = None,
    threads: int | None = 1,
) -> SegmentationResult:
    features = encode_episode(episode, encoder_cfg, threads)
    return segment_features(features, head_cfg, params, quest_cfg)


def _evaluate_one(
    episode: Episode,
    encoder_cfg: EncoderConfig,
    head_cfg: HeadConfig,
    params: QuestParameters | None,
    quest_cfg: QuestConfig | None,
) -> tuple[MetricAccumulator, EpisodeRecord]:
    features = encode_episode(episode, encoder_cfg)
    if features.query_labels is None:
        raise InvalidEpisode("evaluation needs labeled query clouds")
    result = segment_features(features, head_cfg, params, quest_cfg)
    acc = accumulate(MetricAccumulator(), result.predictions, features.query_labels,
                     episode.target_classes)
    record = EpisodeRecord(
        index=int(episode.source.get("episode", -1)),
        target_classes=episode.target_classes,
        confusion=confusion_matrix(result.predictions, features.query_labels,
                                   episode.n_way + 1),
        source=episode.source,
    )
    return acc, record


def evaluate(
    episodes: Iterable[Episode],
    encoder_cfg: EncoderConfig,
    head_cfg: HeadConfig,
    params: QuestParameters | None = None,
    quest_cfg: QuestConfig | None = None,
    threads: int | None = None,
) -> EvaluationResult:
    """Segment every episode and merge the per-episode tallies.

    Episodes run in parallel; results are merged in input order, so the
    outcome does not depend on the worker count.
    """
    workers = resolve_threads(threads)
    logger.info("Evaluating episodes on %d threads (%s)", workers,
                "training-free" if params is None else "with prototype adjustment")
    total = MetricAccumulator()
    records = []
    outcomes = ordered_imap(
        lambda ep: _evaluate_one(ep, encoder_cfg, head_cfg, params, quest_cfg),
        episodes, workers,
    )
    for acc, record in outcomes:
        total = total.merge(acc)
        records.append(record)
    logger.info("Evaluated %d episodes", len(records))
    return EvaluationResult(accumulator=total, records=records)
