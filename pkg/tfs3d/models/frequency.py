from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from tfs3d.models._arrays import frozen_array


class FrequencyDistribution(str, enum.Enum):
    loglinear = "loglinear"   # parameter: theta
    gaussian = "gaussian"     # parameter: variance delta
    uniform = "uniform"       # parameter: half-range r
    laplacian = "laplacian"   # parameter: scale b


@dataclass(frozen=True, eq=False)
class FrequencyVector:
    values: np.ndarray
    distribution: FrequencyDistribution
    parameter: float
    seed: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", frozen_array(self.values, np.float64))

    def __len__(self) -> int:
        return int(self.values.shape[0])
