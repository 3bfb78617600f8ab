"""Builders shared by several test modules."""

import numpy as np

from tfs3d.models.episode import Episode, remap_episode_labels
from tfs3d.models.point_cloud import PointCloud


def random_cloud(rng: np.random.Generator, n_points: int, labels=None,
                 scale: float = 1.0) -> PointCloud:
    coords = rng.uniform(0.0, scale, size=(n_points, 3))
    colors = rng.uniform(0.0, 1.0, size=(n_points, 3))
    return PointCloud(coords, colors, labels)


def random_episode(rng: np.random.Generator, n_way: int = 2, k_shot: int = 1,
                   n_queries: int = 1, n_points: int = 32,
                   targets: tuple[int, ...] | None = None) -> Episode:
    """Remapped episode whose clouds carry labels drawn from the targets plus class 99."""
    targets = targets or tuple(range(10, 10 + n_way))
    pool = np.array([*targets, 99])

    def labeled(target=None):
        labels = rng.choice(pool, size=n_points)
        if target is not None:
            labels[: n_points // 4] = target
        return random_cloud(rng, n_points, labels)

    raw = Episode(
        n_way=n_way,
        k_shot=k_shot,
        support=[[labeled(t) for _ in range(k_shot)] for t in targets],
        query=[labeled(targets[q % n_way]) for q in range(n_queries)],
        target_classes=targets,
    )
    return remap_episode_labels(raw)
