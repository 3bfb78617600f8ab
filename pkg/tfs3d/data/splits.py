"""Class names and cross-validation folds of the two indoor benchmarks.

Ids are the label ids stored in the standard pre-blocked files of each
benchmark. Each benchmark is split into two folds. Evaluating on fold `i`
means fold `i` holds the unseen (test) classes and the other fold the seen
(training) classes. Background ids belong to neither fold and are never
indexed.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class BenchmarkSplit:
    name: str
    class_names: dict[int, str]
    background: dict[int, str]
    folds: tuple[tuple[int, ...], tuple[int, ...]]

    def unseen(self, fold: int) -> list[int]:
        return sorted(self.folds[fold])

    def seen(self, fold: int) -> list[int]:
        return sorted(self.folds[1 - fold])

    def class_id(self, name: str) -> int:
        for cls, known in self.class_names.items():
            if known == name:
                return cls
        raise KeyError(f"Unknown {self.name} class: '{name}'")


def _split(
    name: str, labels: list[str], background: list[str], folds: tuple[list[str], list[str]]
) -> BenchmarkSplit:
    ids = {label: i for i, label in enumerate(labels)}
    return BenchmarkSplit(
        name=name,
        class_names={i: label for i, label in enumerate(labels) if label not in background},
        background={ids[label]: label for label in background},
        folds=(tuple(ids[c] for c in folds[0]), tuple(ids[c] for c in folds[1])),
    )


# label order of the pre-blocked files
_S3DIS_LABELS = [
    "ceiling", "floor", "wall", "beam", "column", "window", "door",
    "table", "chair", "sofa", "bookcase", "board", "clutter",
]

_SCANNET_LABELS = [
    "unannotated", "wall", "floor", "chair", "table", "desk", "bed", "bookshelf",
    "sofa", "sink", "bathtub", "toilet", "curtain", "counter", "door", "window",
    "showercurtain", "refrigerator", "picture", "cabinet", "otherfurniture",
]

S3DIS = _split(
    "s3dis",
    _S3DIS_LABELS,
    background=["clutter"],
    folds=(
        ["beam", "board", "bookcase", "ceiling", "chair", "column"],
        ["door", "floor", "sofa", "table", "wall", "window"],
    ),
)

SCANNET = _split(
    "scannet",
    _SCANNET_LABELS,
    background=["unannotated"],
    folds=(
        ["bathtub", "bed", "bookshelf", "cabinet", "chair",
         "counter", "curtain", "desk", "door", "floor"],
        ["otherfurniture", "picture", "refrigerator", "showercurtain", "sink",
         "sofa", "table", "toilet", "wall", "window"],
    ),
)

BENCHMARKS: dict[str, BenchmarkSplit] = {b.name: b for b in (S3DIS, SCANNET)}


def get_benchmark(name: str) -> BenchmarkSplit:
    try:
        return BENCHMARKS[name.lower()]
    except KeyError:
        raise KeyError(f"Unknown benchmark: '{name}' (known: {sorted(BENCHMARKS)})") from None
