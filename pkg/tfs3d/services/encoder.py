"""The training-free point encoder.

Pipeline (a U-Net over an FPS pyramid, no learnable weights):

  layer 0     initial trigonometric embedding of coordinates and colors
  layers 1-3  local embedding: halve the points by FPS, group k neighbors,
              weigh the grouped features with trigonometric PEs of the
              relative offsets, pool with max + mean
  layers 4-6  upsampling: inverse-distance interpolation back to the finer
              level, concatenated with that level's local feature

Channel bookkeeping for d initial frequencies: level l holds 2^l * 6d
channels, upsampling yields 12, 14 and finally 15 times 6d = 90d channels.
"""

from __future__ import annotations

import logging
from functools import lru_cache

import numpy as np

from tfs3d.errors import EncodeError, InvalidArgument
from tfs3d.models.encoded import EncodedCloud, PyramidLevel
from tfs3d.models.frequency import FrequencyVector
from tfs3d.models.point_cloud import FeatureMatrix, PointCloud
from tfs3d.schemas.encoder import EncoderConfig, PEMode
from tfs3d.services.frequencies import embed, make_frequencies
from tfs3d.services.spatial import (
    DISTANCE_EPS,
    farthest_point_sample,
    inverse_distance_weights,
    knn,
)

logger = logging.getLogger(__name__)

NUM_LOCAL_LAYERS = 3


# ---------------------------------------------------------------------------
# Frequencies and coordinate normalization
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def initial_frequencies(cfg: EncoderConfig) -> FrequencyVector:
    dist = cfg.initial_distribution
    return make_frequencies(cfg.d, dist, cfg.parameter_for(dist), cfg.seed)


@lru_cache(maxsize=64)
def local_frequencies(cfg: EncoderConfig, level: int) -> FrequencyVector:
    """2^l * d frequencies for local layer l, seeded with seed XOR l."""
    dist = cfg.local_distribution
    return make_frequencies((2 ** level) * cfg.d, dist, cfg.parameter_for(dist), cfg.seed ^ level)


def normalize_block_coords(coords: np.ndarray) -> np.ndarray:
    """Shift the block to the origin and scale its largest extent to 1.

    One scale for all axes keeps neighbor relations intact; a degenerate
    block (all points coincident) is only shifted.
    """
    coords = np.asarray(coords, dtype=np.float64)
    low = coords.min(axis=0)
    extent = float((coords.max(axis=0) - low).max())
    shifted = coords - low
    return shifted / extent if extent > 0 else shifted


def _weigh(grouped: np.ndarray, pe: np.ndarray, mode: PEMode) -> np.ndarray:
    if mode == PEMode.add_multiply:
        return (grouped + pe) * pe
    if mode == PEMode.add:
        return grouped + pe
    if mode == PEMode.multiply:
        return grouped * pe
    return grouped


# ---------------------------------------------------------------------------
# Layers
# ---------------------------------------------------------------------------

def initial_embed(cloud: PointCloud, cfg: EncoderConfig) -> FeatureMatrix:
    """f0 = alpha * Emb(p; u) + (1 - alpha) * Emb(c; u)."""
    coords = normalize_block_coords(cloud.coords) if cfg.normalize_coords else cloud.coords
    u = initial_frequencies(cfg)
    f_coord = embed(coords, u)
    if not cfg.use_color:
        return FeatureMatrix(f_coord)
    f_color = embed(cloud.colors, u)
    return FeatureMatrix(cfg.alpha * f_coord + (1.0 - cfg.alpha) * f_color)


def local_embed_layer(
    level: int,
    parent_feats: np.ndarray,
    parent_coords: np.ndarray,
    parent_colors: np.ndarray,
    cfg: EncoderConfig,
) -> tuple[np.ndarray, FeatureMatrix]:
    """Downsample by half, group neighbors, weigh with PEs and pool.

    Returns the FPS indices of the centers (into the parent level) and the
    center features with twice the parent channel count.
    """
    if level not in (1, 2, 3):
        raise InvalidArgument(f"local embedding level must be 1, 2 or 3, got {level}")
    parent_feats = np.asarray(parent_feats, dtype=np.float64)
    n_parent = parent_feats.shape[0]
    if n_parent < 2 or n_parent < cfg.k:
        raise EncodeError(
            f"level {level} needs at least max(2, k={cfg.k}) points, parent has {n_parent}"
        )

    centers = farthest_point_sample(parent_coords, n_parent // 2)
    table = knn(parent_coords[centers], parent_coords, cfg.k)
    nb = table.indices                                   # (S, k)

    center_feats = parent_feats[centers][:, None, :]     # (S, 1, C)
    grouped = np.concatenate(
        [np.broadcast_to(center_feats, nb.shape + (parent_feats.shape[1],)), parent_feats[nb]],
        axis=-1,
    )                                                    # (S, k, 2C)

    radius = np.maximum(table.distances[:, -1], DISTANCE_EPS)[:, None, None]
    delta_p = (parent_coords[nb] - parent_coords[centers][:, None, :]) / radius
    v = local_frequencies(cfg, level)
    f_coord = _weigh(grouped, embed(delta_p, v), cfg.pe_mode)
    if cfg.use_color:
        delta_c = parent_colors[nb] - parent_colors[centers][:, None, :]
        f_color = _weigh(grouped, embed(delta_c, v), cfg.pe_mode)
        weighted = cfg.alpha * f_coord + (1.0 - cfg.alpha) * f_color
    else:
        weighted = f_coord

    pooled = weighted.max(axis=1) + weighted.mean(axis=1)
    logger.debug("local layer %d: %d -> %d points, %d channels",
                 level, n_parent, centers.shape[0], pooled.shape[1])
    return centers, FeatureMatrix(pooled)


def upsample_layer(
    level: int,
    child_feats: np.ndarray,
    child_coords: np.ndarray,
    target_coords: np.ndarray,
    skip_feats: np.ndarray,
    cfg: EncoderConfig,
) -> FeatureMatrix:
    """Interpolate coarse features onto `target_coords` and prepend the skip feature."""
    if level not in (4, 5, 6):
        raise InvalidArgument(f"upsampling level must be 4, 5 or 6, got {level}")
    child_feats = np.asarray(child_feats, dtype=np.float64)
    skip_feats = np.asarray(skip_feats, dtype=np.float64)
    if child_feats.shape[0] != np.asarray(child_coords).shape[0]:
        raise EncodeError(
            f"level {level}: {child_feats.shape[0]} child features "
            f"for {np.asarray(child_coords).shape[0]} child points"
        )
    if skip_feats.shape[0] != np.asarray(target_coords).shape[0]:
        raise EncodeError(
            f"level {level}: {skip_feats.shape[0]} skip features "
            f"for {np.asarray(target_coords).shape[0]} target points"
        )
    if child_feats.shape[0] < cfg.k:
        raise EncodeError(
            f"level {level}: {child_feats.shape[0]} child points, fewer than k={cfg.k}"
        )

    table = knn(target_coords, child_coords, cfg.k)
    weights = inverse_distance_weights(table.distances)
    interpolated = np.einsum("pk,pkc->pc", weights, child_feats[table.indices])
    return FeatureMatrix(np.concatenate([skip_feats, interpolated], axis=1))


# ---------------------------------------------------------------------------
# Full encoder
# ---------------------------------------------------------------------------

def encode(cloud: PointCloud, cfg: EncoderConfig) -> EncodedCloud:
    if cloud.num_points < cfg.min_points:
        raise EncodeError(
            f"encoding needs at least 8k = {cfg.min_points} points, got {cloud.num_points}"
        )

    coords = normalize_block_coords(cloud.coords) if cfg.normalize_coords else cloud.coords
    f0 = initial_embed(cloud, cfg)
    pyramid = [
        PyramidLevel(0, np.arange(cloud.num_points), f0, coords, cloud.colors),
    ]

    for level in range(1, NUM_LOCAL_LAYERS + 1):
        parent = pyramid[-1]
        centers, feats = local_embed_layer(
            level, parent.features.data, parent.coords, parent.colors, cfg
        )
        pyramid.append(
            PyramidLevel(level, centers, feats, parent.coords[centers], parent.colors[centers])
        )

    current = pyramid[NUM_LOCAL_LAYERS].features.data
    for level in (4, 5, 6):
        child = pyramid[7 - level]
        target = pyramid[6 - level]
        current = upsample_layer(
            level, current, child.coords, target.coords, target.features.data, cfg
        ).data

    final = FeatureMatrix(current)
    if final.channels != cfg.feature_dim:
        raise EncodeError(f"expected {cfg.feature_dim} channels, got {final.channels}")
    return EncodedCloud(final=final, pyramid=tuple(pyramid))
