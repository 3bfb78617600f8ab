from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class NeighborTable:
    """k nearest reference points per query point.

    Rows are sorted by distance; equal distances are ordered by the
    lexicographic coordinate of the neighbor, then by its index.
    """
    indices: np.ndarray    # (P, k) int64
    distances: np.ndarray  # (P, k) float64

    @property
    def k(self) -> int:
        return int(self.indices.shape[1])
