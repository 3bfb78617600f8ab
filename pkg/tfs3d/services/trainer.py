"""Episodic training of the prototype-adjustment module on a frozen encoder."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np

from tfs3d.errors import TrainingError
from tfs3d.models.episode import Episode
from tfs3d.schemas.encoder import EncoderConfig
from tfs3d.schemas.head import HeadConfig
from tfs3d.schemas.quest import QuestConfig
from tfs3d.services.optimizer import adamw_step, learning_rate
from tfs3d.services.pipeline import EpisodeFeatures, encode_episode
from tfs3d.services.quest import QuestParameters, check_parameters, init_parameters, quest_loss

logger = logging.getLogger(__name__)


@dataclass
class TrainingHistory:
    losses: list[float] = field(default_factory=list)
    learning_rates: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.losses)


def features_loss(
    features: EpisodeFeatures,
    head_cfg: HeadConfig,
    params: QuestParameters,
    quest_cfg: QuestConfig,
    with_grad: bool = True,
) -> tuple[float, dict[str, np.ndarray]]:
    if features.query_labels is None:
        raise TrainingError("training episodes need labeled query clouds")
    loss, grads, _ = quest_loss(
        features.support_feats, features.support_labels,
        features.query_feats, features.query_labels,
        params, quest_cfg, head_cfg, with_grad=with_grad,
    )
    return loss, grads


def episode_loss(
    episode: Episode,
    encoder_cfg: EncoderConfig,
    head_cfg: HeadConfig,
    params: QuestParameters,
    quest_cfg: QuestConfig,
) -> tuple[float, dict[str, np.ndarray]]:
    """Cross-entropy of one episode and its parameter gradients."""
    return features_loss(encode_episode(episode, encoder_cfg), head_cfg, params, quest_cfg)


def train(
    episodes: Iterable[Episode | EpisodeFeatures],
    encoder_cfg: EncoderConfig,
    head_cfg: HeadConfig,
    quest_cfg: QuestConfig,
    max_iters: int,
    params: QuestParameters | None = None,
) -> tuple[QuestParameters, TrainingHistory]:
    """Run `max_iters` AdamW iterations, one episode per iteration.

    Parameters are created from the first episode's feature shape unless
    given. Items may be raw episodes or pre-encoded features; the encoder
    is frozen so caching features is exact. Stops early with a warning when
    the stream runs dry.
    """
    history = TrainingHistory()
    stream = iter(episodes)
    for it in range(max_iters):
        try:
            item = next(stream)
        except StopIteration:
            logger.warning("Episode stream ended after %d of %d iterations", it, max_iters)
            break
        features = item if isinstance(item, EpisodeFeatures) else encode_episode(item, encoder_cfg)

        dim = features.support_feats.shape[-1]
        pooled = quest_cfg.pooled_length(features.support_feats.shape[2])
        if params is None:
            params = init_parameters(dim, pooled, quest_cfg)
            logger.info("Initialized %d parameters (D=%d, M'=%d)",
                        params.num_parameters(), dim, pooled)
        check_parameters(params, dim, pooled, quest_cfg)

        loss, grads = features_loss(features, head_cfg, params, quest_cfg)
        if not math.isfinite(loss):
            raise TrainingError(f"non-finite loss {loss} at iteration {it}")

        lr = learning_rate(it, quest_cfg)
        if it > 0 and it % quest_cfg.lr_halve_every == 0:
            logger.info("Iteration %d: learning rate halved to %.3g", it, lr)
        adamw_step(params, grads, lr, quest_cfg)

        history.losses.append(loss)
        history.learning_rates.append(lr)
        if it % quest_cfg.log_every == 0 or it == max_iters - 1:
            logger.info("Iteration %d/%d: loss %.5f, lr %.3g", it + 1, max_iters, loss, lr)

    if params is None:
        raise TrainingError("no training episodes were consumed")
    return params, history
