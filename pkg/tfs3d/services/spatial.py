"""Deterministic geometric primitives.

Farthest point sampling, exact k-nearest neighbors and inverse-distance
interpolation weights. Every tie is broken by the lexicographic order of
the point coordinates (x, then y, then z) and finally by index, which makes
the results independent of the input point order.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy.spatial import cKDTree

from tfs3d.errors import InvalidArgument
from tfs3d.models.neighbors import NeighborTable

logger = logging.getLogger(__name__)

DISTANCE_EPS = 1e-8

# Relative slack when collecting candidates that tie with the k-th distance
_TIE_SLACK = 1e-9


def lexicographic_rank(coords: np.ndarray) -> np.ndarray:
    """rank[i] = position of point i when sorted by (x, y, z, index)."""
    coords = np.asarray(coords, dtype=np.float64)
    order = np.lexsort((np.arange(coords.shape[0]), coords[:, 2], coords[:, 1], coords[:, 0]))
    rank = np.empty(coords.shape[0], dtype=np.int64)
    rank[order] = np.arange(coords.shape[0])
    return rank


def pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean distances computed from explicit differences.

    The expanded |a|^2 + |b|^2 - 2ab form is avoided because its rounding
    depends on the magnitude of the other points.
    """
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def farthest_point_sample(coords: np.ndarray, count: int) -> np.ndarray:
    """Select `count` point indices by farthest point sampling.

    Starts from the lexicographically smallest point; each next point
    maximizes the minimum distance to the points already selected.
    """
    coords = np.asarray(coords, dtype=np.float64)
    n_points = coords.shape[0]
    if count < 1 or count > n_points:
        raise InvalidArgument(f"cannot sample {count} points from {n_points}")

    rank = lexicographic_rank(coords)
    selected = np.empty(count, dtype=np.int64)
    selected[0] = int(np.argmin(rank))

    # Squared distances order the same way as distances and skip the sqrt
    diff = coords - coords[selected[0]]
    min_dist = np.einsum("ij,ij->i", diff, diff)
    for i in range(1, count):
        best = min_dist.max()
        candidates = np.flatnonzero(min_dist == best)
        nxt = int(candidates[np.argmin(rank[candidates])])
        selected[i] = nxt
        diff = coords - coords[nxt]
        np.minimum(min_dist, np.einsum("ij,ij->i", diff, diff), out=min_dist)
    return selected


def knn(query_coords: np.ndarray, ref_coords: np.ndarray, k: int) -> NeighborTable:
    """Exact k nearest reference points for every query point.

    A kd-tree proposes candidates; every candidate within the k-th distance
    (plus ties) is then re-scored from explicit coordinate differences and
    ordered by (distance, lexicographic rank).
    """
    query_coords = np.asarray(query_coords, dtype=np.float64)
    ref_coords = np.asarray(ref_coords, dtype=np.float64)
    n_ref = ref_coords.shape[0]
    if k < 1 or k > n_ref:
        raise InvalidArgument(f"k={k} must be between 1 and the reference size {n_ref}")

    rank = lexicographic_rank(ref_coords)
    tree = cKDTree(ref_coords)
    kth, _ = tree.query(query_coords, k=[k])
    radii = kth[:, 0] * (1.0 + _TIE_SLACK) + DISTANCE_EPS
    candidate_lists = tree.query_ball_point(query_coords, r=radii)

    indices = np.empty((query_coords.shape[0], k), dtype=np.int64)
    distances = np.empty((query_coords.shape[0], k), dtype=np.float64)
    for row, candidates in enumerate(candidate_lists):
        cand = np.asarray(candidates, dtype=np.int64)
        diff = ref_coords[cand] - query_coords[row]
        dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        order = np.lexsort((rank[cand], dist))[:k]
        indices[row] = cand[order]
        distances[row] = dist[order]

    logger.debug("knn: %d queries against %d points, k=%d", query_coords.shape[0], n_ref, k)
    return NeighborTable(indices=indices, distances=distances)


def inverse_distance_weights(distances: np.ndarray) -> np.ndarray:
    """Normalized inverse-distance weights along the last axis."""
    inv = 1.0 / (np.asarray(distances, dtype=np.float64) + DISTANCE_EPS)
    return inv / inv.sum(axis=-1, keepdims=True)
