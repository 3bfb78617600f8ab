from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class PrototypeSet:
    """Class prototypes for one episode; row 0 is the background class."""
    prototypes: np.ndarray    # (N+1, D)
    label_onehot: np.ndarray  # (N+1, N+1) identity
    valid_mask: np.ndarray    # (N+1,) bool, False when the class had no support points

    @property
    def num_classes(self) -> int:
        return int(self.prototypes.shape[0])

    @property
    def channels(self) -> int:
        return int(self.prototypes.shape[1])
