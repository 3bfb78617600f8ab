"""Point clouds and per-point feature matrices.

A PointCloud is one block of M points: coordinates in meters (block-local),
colors normalized to [0, 1] and optional integer labels where -1 marks an
unlabeled point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tfs3d.errors import InvalidArgument
from tfs3d.models._arrays import frozen_array

UNLABELED = -1


@dataclass(frozen=True, eq=False)
class PointCloud:
    coords: np.ndarray            # (M, 3) float64
    colors: np.ndarray            # (M, 3) float64 in [0, 1]
    labels: np.ndarray | None = None  # (M,) int64, -1 = unlabeled

    def __post_init__(self) -> None:
        coords = frozen_array(self.coords, np.float64)
        colors = frozen_array(self.colors, np.float64)
        if coords.ndim != 2 or coords.shape[1] != 3:
            raise InvalidArgument(f"coords must have shape (M, 3), got {coords.shape}")
        if coords.shape[0] < 1:
            raise InvalidArgument("a point cloud needs at least one point")
        if colors.shape != coords.shape:
            raise InvalidArgument(
                f"colors shape {colors.shape} does not match coords shape {coords.shape}"
            )
        if not np.all(np.isfinite(coords)):
            raise InvalidArgument("coords contain non-finite values")
        if not np.all(np.isfinite(colors)) or colors.min() < 0.0 or colors.max() > 1.0:
            raise InvalidArgument("every color channel must lie in [0, 1]")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "colors", colors)

        if self.labels is not None:
            labels = frozen_array(self.labels, np.int64)
            if labels.shape != (coords.shape[0],):
                raise InvalidArgument(
                    f"labels must have length {coords.shape[0]}, got shape {labels.shape}"
                )
            object.__setattr__(self, "labels", labels)

    @property
    def num_points(self) -> int:
        return int(self.coords.shape[0])

    @property
    def has_labels(self) -> bool:
        return self.labels is not None

    def with_labels(self, labels: np.ndarray | None) -> PointCloud:
        return PointCloud(self.coords, self.colors, labels)

    def subset(self, indices: np.ndarray) -> PointCloud:
        """Points at `indices` (repeats allowed), in that order."""
        idx = np.asarray(indices, dtype=np.int64)
        labels = None if self.labels is None else self.labels[idx]
        return PointCloud(self.coords[idx], self.colors[idx], labels)


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    data: np.ndarray  # (P, C) float64

    def __post_init__(self) -> None:
        data = frozen_array(self.data, np.float64)
        if data.ndim != 2:
            raise InvalidArgument(f"feature matrix must be 2-D, got shape {data.shape}")
        if data.shape[1] < 1:
            raise InvalidArgument("feature matrix needs at least one channel")
        if not np.all(np.isfinite(data)):
            raise InvalidArgument("feature matrix contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def point_count(self) -> int:
        return int(self.data.shape[0])

    @property
    def channels(self) -> int:
        return int(self.data.shape[1])
