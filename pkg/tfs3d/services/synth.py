"""Synthetic labeled scenes: Gaussian clusters with fixed colors.

Used to verify the pipeline at desk scale where the ground truth is known
by construction.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from tfs3d.errors import InvalidArgument
from tfs3d.models.episode import Episode, remap_episode_labels
from tfs3d.models.point_cloud import PointCloud
from tfs3d.schemas.manifest import SplitManifest
from tfs3d.schemas.synth import ClusterDescriptor, SynthClass, SynthDatasetSpec
from tfs3d.services.block_io import write_block
from tfs3d.services.episode_sampler import index_blocks

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def synth_scene(
    clusters: Sequence[ClusterDescriptor],
    noise: float,
    seed: int,
    color_noise: float = 0.0,
) -> PointCloud:
    """One labeled cloud, clusters in the given order.

    Point offsets are N(0, (noise * extent)^2) per axis around the center;
    colors are the cluster color plus N(0, color_noise^2), clipped to [0, 1].
    """
    rng = np.random.default_rng(seed)
    coords, colors, labels = [], [], []
    for cluster in clusters:
        center = np.asarray(cluster.center, dtype=np.float64)
        offsets = rng.standard_normal((cluster.budget, 3)) * (noise * cluster.extent)
        coords.append(center + offsets)
        base = np.broadcast_to(np.asarray(cluster.color, dtype=np.float64), (cluster.budget, 3))
        if color_noise > 0.0:
            base = np.clip(base + rng.standard_normal((cluster.budget, 3)) * color_noise, 0.0, 1.0)
        colors.append(base)
        labels.append(np.full(cluster.budget, cluster.class_id, dtype=np.int64))
    return PointCloud(np.concatenate(coords), np.concatenate(colors), np.concatenate(labels))


def split_budget(total: int, parts: int) -> list[int]:
    """`total` points over `parts` clusters, remainder to the first ones."""
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def _clusters_for(
    classes: Sequence[SynthClass],
    budget: int,
    rng: np.random.Generator,
    center_jitter: float,
    color_shift: float = 0.0,
) -> list[ClusterDescriptor]:
    clusters = []
    for cls, count in zip(classes, split_budget(budget, len(classes))):
        jitter = rng.uniform(-center_jitter, center_jitter, size=3) if center_jitter else np.zeros(3)
        color = np.clip(np.asarray(cls.color) + color_shift, 0.0, 1.0)
        clusters.append(ClusterDescriptor(
            class_id=cls.class_id,
            center=tuple((np.asarray(cls.center) + jitter).tolist()),
            extent=cls.extent,
            color=tuple(color.tolist()),
            budget=count,
        ))
    return clusters


def synth_dataset(spec: SynthDatasetSpec, out_dir: str | Path) -> SplitManifest:
    """Write `spec.blocks` block files plus a manifest into `out_dir`.

    Output is byte-for-byte reproducible for a fixed spec.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for b in range(spec.blocks):
        rng = np.random.default_rng([spec.seed, b])
        picks = sorted(rng.choice(len(spec.classes), size=spec.classes_per_block, replace=False))
        chosen = [spec.classes[i] for i in picks]
        clusters = _clusters_for(chosen, spec.points_per_block, rng, spec.center_jitter)
        cloud = synth_scene(clusters, spec.noise, int(rng.integers(2**31)), spec.color_noise)
        path = out / f"block_{b:04d}.pcb"
        write_block(path, cloud)
        paths.append(path)

    manifest = index_blocks(
        paths,
        class_names={c.class_id: c.name for c in spec.classes},
        seen=spec.seen,
        unseen=spec.unseen,
        class_threshold=spec.class_threshold,
        root=out,
    )
    manifest.save(out / MANIFEST_NAME)
    logger.info("Wrote %d synthetic blocks and %s to %s", spec.blocks, MANIFEST_NAME, out)
    return manifest


def synth_episode_family(
    classes: Sequence[SynthClass],
    n_episodes: int,
    seed: int,
    num_points: int = 512,
    color_shift: float = 0.0,
    noise: float = 0.5,
    center_jitter: float = 0.05,
    n_way: int = 2,
) -> list[Episode]:
    """1-shot episodes built directly from scenes, without block files.

    Every scene holds the N target clusters and one distractor class as
    background. Query colors are offset by `color_shift`, giving the
    support/query domain gap the trainable module is meant to close.
    """
    if len(classes) < n_way + 1:
        raise InvalidArgument(f"need at least {n_way + 1} classes for {n_way}-way episodes")
    rng = np.random.default_rng(seed)
    episodes = []
    for index in range(n_episodes):
        picks = rng.choice(len(classes), size=n_way + 1, replace=False)
        targets = [classes[i] for i in picks[:n_way]]
        distractor = classes[picks[n_way]]

        support = []
        for target in targets:
            clusters = _clusters_for([target, distractor], num_points, rng, center_jitter)
            support.append([synth_scene(clusters, noise, int(rng.integers(2**31)))])
        clusters = _clusters_for([*targets, distractor], num_points, rng, center_jitter,
                                 color_shift=color_shift)
        query = [synth_scene(clusters, noise, int(rng.integers(2**31)))]

        raw = Episode(
            n_way=n_way,
            k_shot=1,
            support=support,
            query=query,
            target_classes=tuple(t.class_id for t in targets),
            source={"episode": index},
        )
        episodes.append(remap_episode_labels(raw))
    return episodes
