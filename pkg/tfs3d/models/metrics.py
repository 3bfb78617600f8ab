from __future__ import annotations

from dataclasses import dataclass, field


def _add_into(target: dict, source: dict) -> None:
    for cls, value in source.items():
        target[cls] = target.get(cls, 0) + value


@dataclass
class MetricAccumulator:
    """Per-class IoU tallies keyed by dataset class id.

    Merging is associative and commutative, so episodes can be evaluated in
    parallel and merged at the end. The per-episode IoU sums only feed the
    per-episode averaging mode of `miou`.
    """
    intersection: dict[int, int] = field(default_factory=dict)
    union: dict[int, int] = field(default_factory=dict)
    support: dict[int, int] = field(default_factory=dict)   # ground-truth point count
    episode_iou_sum: dict[int, float] = field(default_factory=dict)
    episode_iou_count: dict[int, int] = field(default_factory=dict)
    episodes: int = 0

    def merge(self, other: MetricAccumulator) -> MetricAccumulator:
        merged = MetricAccumulator(episodes=self.episodes + other.episodes)
        for key in ("intersection", "union", "support", "episode_iou_sum", "episode_iou_count"):
            for source in (self, other):
                _add_into(getattr(merged, key), getattr(source, key))
        return merged

    @property
    def classes(self) -> list[int]:
        return sorted(set(self.union) | set(self.support))
