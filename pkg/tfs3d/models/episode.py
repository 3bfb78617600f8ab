"""N-way K-shot episodes and the label remapping into episode space.

Episode space: target class `target_classes[i]` becomes label i+1, every
other labeled point becomes 0 (background). Unlabeled points (-1) stay -1
and are ignored by prototypes, losses and metrics.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from tfs3d.errors import InvalidEpisode
from tfs3d.models.point_cloud import UNLABELED, PointCloud


@dataclass(frozen=True, eq=False)
class Episode:
    n_way: int
    k_shot: int
    support: tuple[tuple[PointCloud, ...], ...]   # N x K
    query: tuple[PointCloud, ...]                 # Q
    target_classes: tuple[int, ...]
    remapped: bool = False
    # Free-form provenance (block paths, combination index) used by reports
    source: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        support = tuple(tuple(shots) for shots in self.support)
        query = tuple(self.query)
        targets = tuple(int(c) for c in self.target_classes)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "query", query)
        object.__setattr__(self, "target_classes", targets)

        if self.n_way < 1 or self.k_shot < 1:
            raise InvalidEpisode(f"invalid episode shape {self.n_way}-way {self.k_shot}-shot")
        if len(targets) != self.n_way:
            raise InvalidEpisode(
                f"expected {self.n_way} target classes, got {len(targets)}"
            )
        if len(support) != self.n_way or any(len(s) != self.k_shot for s in support):
            raise InvalidEpisode(
                f"support set must be {self.n_way} x {self.k_shot} point clouds"
            )
        if len(query) < 1:
            raise InvalidEpisode("an episode needs at least one query cloud")

    @property
    def num_queries(self) -> int:
        return len(self.query)

    @property
    def support_flat(self) -> list[PointCloud]:
        return [cloud for shots in self.support for cloud in shots]

    @property
    def queries_labeled(self) -> bool:
        return all(q.has_labels for q in self.query)


def remap_labels(labels: np.ndarray, target_classes: tuple[int, ...] | list[int]) -> np.ndarray:
    """Map dataset class ids into episode space (see module docstring)."""
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros_like(labels)
    out[labels == UNLABELED] = UNLABELED
    for i, cls in enumerate(target_classes):
        out[labels == cls] = i + 1
    return out


def remap_episode_labels(raw: Episode) -> Episode:
    if len(set(raw.target_classes)) != len(raw.target_classes):
        raise InvalidEpisode(f"duplicate target classes: {list(raw.target_classes)}")
    for n, shots in enumerate(raw.support):
        for k, cloud in enumerate(shots):
            if not cloud.has_labels:
                raise InvalidEpisode(f"support cloud [{n}][{k}] has no labels")

    targets = raw.target_classes
    support = tuple(
        tuple(cloud.with_labels(remap_labels(cloud.labels, targets)) for cloud in shots)
        for shots in raw.support
    )
    query = tuple(
        q.with_labels(remap_labels(q.labels, targets)) if q.has_labels else q
        for q in raw.query
    )
    return replace(raw, support=support, query=query, remapped=True)
