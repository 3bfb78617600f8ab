from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tfs3d.models.point_cloud import FeatureMatrix


@dataclass(frozen=True, eq=False)
class PyramidLevel:
    """One level of the encoder pyramid.

    `sample_indices` index into the previous level's points (level 0 keeps
    every input point, so its indices are 0..M-1).
    """
    level: int
    sample_indices: np.ndarray
    features: FeatureMatrix
    coords: np.ndarray
    colors: np.ndarray


@dataclass(frozen=True, eq=False)
class EncodedCloud:
    final: FeatureMatrix
    pyramid: tuple[PyramidLevel, ...]

    @property
    def layer_coords(self) -> list[np.ndarray]:
        return [level.coords for level in self.pyramid]
