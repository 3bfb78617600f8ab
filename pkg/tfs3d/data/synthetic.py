"""Default synthetic class palette.

Eight classes sit on the corners of a 2 m cube with 0.1 m extent, so every
pair of clusters is separated by far more than five extents. Colors are
pairwise distinct.
"""

from tfs3d.schemas.synth import SynthClass, SynthDatasetSpec

DEFAULT_CLASSES: list[SynthClass] = [
    SynthClass(class_id=0, name="crate", center=(0.0, 0.0, 0.0), color=(0.9, 0.1, 0.1)),
    SynthClass(class_id=1, name="barrel", center=(2.0, 0.0, 0.0), color=(0.1, 0.9, 0.1)),
    SynthClass(class_id=2, name="pillar", center=(0.0, 2.0, 0.0), color=(0.1, 0.1, 0.9)),
    SynthClass(class_id=3, name="shelf", center=(2.0, 2.0, 0.0), color=(0.9, 0.9, 0.1)),
    SynthClass(class_id=4, name="lamp", center=(0.0, 0.0, 2.0), color=(0.9, 0.1, 0.9)),
    SynthClass(class_id=5, name="stool", center=(2.0, 0.0, 2.0), color=(0.1, 0.9, 0.9)),
    SynthClass(class_id=6, name="vent", center=(0.0, 2.0, 2.0), color=(0.5, 0.5, 0.5)),
    SynthClass(class_id=7, name="panel", center=(2.0, 2.0, 2.0), color=(0.95, 0.6, 0.2)),
]


def default_dataset_spec(blocks: int = 64, seed: int = 0) -> SynthDatasetSpec:
    return SynthDatasetSpec(
        classes=DEFAULT_CLASSES,
        seen=[0, 1, 2, 3],
        unseen=[4, 5, 6, 7],
        blocks=blocks,
        seed=seed,
    )
