"""N-way K-shot episode sampling over an indexed block collection.

Test episodes walk every N-combination of the unseen classes and draw a
fixed number of episodes per combination. Training episodes are an endless
stream over the seen classes. Both are fully determined by the seed.
"""

from __future__ import annotations

import itertools
import logging
import os
from collections.abc import Iterable, Iterator, Sequence
from functools import lru_cache
from pathlib import Path

import numpy as np

from tfs3d.errors import InvalidArgument, SamplingError
from tfs3d.models.episode import Episode, remap_episode_labels
from tfs3d.models.point_cloud import PointCloud
from tfs3d.schemas.manifest import SplitManifest
from tfs3d.services.block_io import read_block

logger = logging.getLogger(__name__)


@lru_cache(maxsize=256)
def _cached_block(path: str) -> PointCloud:
    return read_block(path)


def load_block(path: str | Path) -> PointCloud:
    """read_block with a small process-wide cache; clouds are immutable."""
    return _cached_block(str(path))


def resample_cloud(cloud: PointCloud, num_points: int, rng: np.random.Generator) -> PointCloud:
    """Exactly `num_points` points: a random subset, or every point plus random repeats."""
    if num_points < 1:
        raise InvalidArgument("num_points must be >= 1")
    n = cloud.num_points
    if n == num_points:
        return cloud
    if n > num_points:
        idx = rng.permutation(n)[:num_points]
    else:
        logger.warning("Block has %d points, padding to %d by resampling", n, num_points)
        idx = np.concatenate([rng.permutation(n), rng.choice(n, num_points - n, replace=True)])
    return cloud.subset(idx)


def _draw_blocks(
    manifest: SplitManifest, class_id: int, count: int, used: set[Path], rng: np.random.Generator
) -> list[Path]:
    available = [p for p in manifest.blocks_for(class_id) if p not in used]
    if len(available) < count:
        raise SamplingError(
            f"class {class_id} ({manifest.class_names.get(class_id, '?')}) has "
            f"{len(available)} unused blocks, episode needs {count}",
            class_id=class_id,
        )
    picks = rng.choice(len(available), size=count, replace=False)
    chosen = [available[i] for i in picks]
    used.update(chosen)
    return chosen


def _sample_episode(
    manifest: SplitManifest,
    targets: Sequence[int],
    k_shot: int,
    n_queries: int,
    num_points: int,
    rng: np.random.Generator,
    source: dict,
) -> Episode:
    used: set[Path] = set()
    support_paths = [_draw_blocks(manifest, c, k_shot, used, rng) for c in targets]
    # query q comes from the index of target q mod N, disjoint from every support block
    query_paths = [
        _draw_blocks(manifest, targets[q % len(targets)], 1, used, rng)[0]
        for q in range(n_queries)
    ]
    support = [[resample_cloud(load_block(p), num_points, rng) for p in shots]
               for shots in support_paths]
    query = [resample_cloud(load_block(p), num_points, rng) for p in query_paths]
    raw = Episode(
        n_way=len(targets),
        k_shot=k_shot,
        support=support,
        query=query,
        target_classes=tuple(targets),
        source={
            **source,
            "support": [[str(p) for p in shots] for shots in support_paths],
            "query": [str(p) for p in query_paths],
        },
    )
    return remap_episode_labels(raw)


def _check_shape(n_way: int, k_shot: int, n_queries: int, num_points: int) -> None:
    if min(n_way, k_shot, n_queries, num_points) < 1:
        raise InvalidArgument("N, K, Q and M must all be >= 1")


def sample_test_episodes(
    manifest: SplitManifest,
    n_way: int,
    k_shot: int,
    n_queries: int,
    episodes_per_combination: int,
    num_points: int,
    seed: int,
) -> Iterator[Episode]:
    _check_shape(n_way, k_shot, n_queries, num_points)
    unseen = sorted(manifest.unseen)
    if len(unseen) < n_way:
        raise SamplingError(f"{len(unseen)} unseen classes cannot form {n_way}-way episodes")
    for cls in unseen:
        # every class may be asked for K support blocks plus its share of queries
        need = k_shot + -(-n_queries // n_way)
        have = len(manifest.blocks_for(cls))
        if have < need:
            raise SamplingError(
                f"class {cls} ({manifest.class_names.get(cls, '?')}) has {have} indexed "
                f"blocks, episodes need {need}",
                class_id=cls,
            )

    rng = np.random.default_rng(seed)
    combinations = list(itertools.combinations(unseen, n_way))
    logger.info(
        "Sampling %d test episodes (%d combinations x %d)",
        len(combinations) * episodes_per_combination, len(combinations), episodes_per_combination,
    )
    index = 0
    for combo_index, targets in enumerate(combinations):
        for _ in range(episodes_per_combination):
            yield _sample_episode(
                manifest, targets, k_shot, n_queries, num_points, rng,
                {"episode": index, "combination": combo_index},
            )
            index += 1


def sample_train_episodes(
    manifest: SplitManifest,
    n_way: int,
    k_shot: int,
    n_queries: int | None = None,
    num_points: int = 2048,
    seed: int = 0,
) -> Iterator[Episode]:
    """Endless stream of episodes over random N-subsets of the seen classes."""
    n_queries = n_way if n_queries is None else n_queries
    _check_shape(n_way, k_shot, n_queries, num_points)
    seen = sorted(manifest.seen)
    if len(seen) < n_way:
        raise SamplingError(f"{len(seen)} seen classes cannot form {n_way}-way episodes")
    rng = np.random.default_rng(seed)
    for index in itertools.count():
        picks = rng.choice(len(seen), size=n_way, replace=False)
        targets = [seen[i] for i in picks]
        yield _sample_episode(manifest, targets, k_shot, n_queries, num_points, rng,
                              {"episode": index})


def index_blocks(
    block_paths: Iterable[str | Path],
    class_names: dict[int, str],
    seen: Sequence[int],
    unseen: Sequence[int],
    class_threshold: int = 100,
    root: str | Path | None = None,
) -> SplitManifest:
    """Build a SplitManifest whose block index lists, per class, the blocks
    holding at least `class_threshold` points of it.

    Paths are stored relative to `root` when given.
    """
    base = Path(root) if root is not None else None
    block_index: dict[int, list[str]] = {}
    for path in sorted(Path(p) for p in block_paths):
        cloud = read_block(path)
        if not cloud.has_labels:
            logger.warning("Skipping unlabeled block %s", path)
            continue
        ids, counts = np.unique(cloud.labels[cloud.labels >= 0], return_counts=True)
        stored = os.path.relpath(path, base) if base is not None else str(path)
        for cls, count in zip(ids.tolist(), counts.tolist()):
            if cls in class_names and count >= class_threshold:
                block_index.setdefault(cls, []).append(stored)
    manifest = SplitManifest(
        class_names=class_names,
        seen=list(seen),
        unseen=list(unseen),
        block_index=dict(sorted(block_index.items())),
        class_threshold=class_threshold,
        root=str(base) if base is not None else None,
    )
    logger.info("Indexed %d classes over %d blocks",
                len(block_index), len({p for ps in block_index.values() for p in ps}))
    return manifest
