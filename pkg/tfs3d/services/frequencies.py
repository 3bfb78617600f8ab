"""Frequency vectors and the trigonometric embedding Emb(x; u).

Embedding layout for an input of 3 components and d frequencies: the sine
block comes first, then the cosine block; inside each block the order is
frequency-major, component-minor (u1*x, u1*y, u1*z, u2*x, ...). Output
width is 6d for 3-vectors.
"""

from __future__ import annotations

import numpy as np

from tfs3d.errors import InvalidArgument
from tfs3d.models.frequency import FrequencyDistribution, FrequencyVector


def make_loglinear(d: int, theta: float) -> FrequencyVector:
    """values[i-1] = theta ** (i / d) for i = 1..d."""
    if d < 1:
        raise InvalidArgument(f"frequency count must be >= 1, got {d}")
    if theta <= 0:
        raise InvalidArgument(f"theta must be > 0, got {theta}")
    exponents = np.arange(1, d + 1, dtype=np.float64) / d
    values = np.power(float(theta), exponents)
    return FrequencyVector(values, FrequencyDistribution.loglinear, float(theta))


def make_random(
    d: int, distribution: FrequencyDistribution, parameter: float, seed: int
) -> FrequencyVector:
    """Draw d frequencies from a zero-centered distribution.

    gaussian: variance `parameter`; uniform: on [-parameter, parameter];
    laplacian: scale `parameter`. A uniform range of 0 yields all zeros.
    """
    if d < 1:
        raise InvalidArgument(f"frequency count must be >= 1, got {d}")
    rng = np.random.default_rng(seed)
    if distribution == FrequencyDistribution.gaussian:
        if parameter <= 0:
            raise InvalidArgument(f"gaussian variance must be > 0, got {parameter}")
        values = rng.normal(0.0, np.sqrt(parameter), size=d)
    elif distribution == FrequencyDistribution.uniform:
        if parameter < 0:
            raise InvalidArgument(f"uniform range must be >= 0, got {parameter}")
        values = rng.uniform(-parameter, parameter, size=d)
    elif distribution == FrequencyDistribution.laplacian:
        if parameter <= 0:
            raise InvalidArgument(f"laplacian scale must be > 0, got {parameter}")
        values = rng.laplace(0.0, parameter, size=d)
    else:
        raise InvalidArgument(f"{distribution.value} frequencies are not random")
    return FrequencyVector(values.astype(np.float64), distribution, float(parameter), seed)


def make_frequencies(
    d: int, distribution: FrequencyDistribution, parameter: float, seed: int
) -> FrequencyVector:
    if distribution == FrequencyDistribution.loglinear:
        return make_loglinear(d, parameter)
    return make_random(d, distribution, parameter, seed)


def embed(x: np.ndarray, freqs: FrequencyVector) -> np.ndarray:
    """Emb(x; u) for one vector (shape (3,)) or a batch (shape (..., 3))."""
    x = np.asarray(x, dtype=np.float64)
    # (..., d, 3) -> (..., 3d), frequency-major
    phase = 2.0 * np.pi * freqs.values[:, None] * x[..., None, :]
    phase = phase.reshape(*x.shape[:-1], -1)
    return np.concatenate([np.sin(phase), np.cos(phase)], axis=-1)
