"""Reading and writing point-cloud blocks.

Binary block files (`.pcb`, little-endian):

    magic        4 bytes  b"PCB1"
    version      u32      1
    point_count  u32
    has_labels   u8
    payload      point_count x (x, y, z, r, g, b as f32 [, label as i32])

Text files (any other extension) hold one point per line:
``x y z r g b [label]``. Blank lines and lines starting with ``#`` are skipped.
"""

from __future__ import annotations

import logging
import struct
from pathlib import Path

import numpy as np

from tfs3d.errors import ParseError
from tfs3d.models.point_cloud import PointCloud

logger = logging.getLogger(__name__)

MAGIC = b"PCB1"
VERSION = 1
BINARY_SUFFIXES = {".pcb"}

_HEADER = struct.Struct("<4sIIB")
_POINT_DTYPE = np.dtype([("xyz", "<f4", 3), ("rgb", "<f4", 3)])
_LABELED_DTYPE = np.dtype([("xyz", "<f4", 3), ("rgb", "<f4", 3), ("label", "<i4")])


def is_binary(path: str | Path) -> bool:
    return Path(path).suffix.lower() in BINARY_SUFFIXES


def _to_cloud(coords, colors, labels, path: Path) -> PointCloud:
    colors = np.asarray(colors, dtype=np.float64)
    if colors.size and (colors.min() < 0.0 or colors.max() > 1.0):
        raise ParseError("color value outside [0, 1]", path=str(path))
    try:
        return PointCloud(coords, colors, labels)
    except ValueError as exc:
        raise ParseError(str(exc), path=str(path)) from exc


# ---------------------------------------------------------------------------
# Binary format
# ---------------------------------------------------------------------------

def _read_binary(path: Path) -> PointCloud:
    buf = path.read_bytes()
    if len(buf) < _HEADER.size:
        raise ParseError(f"header needs {_HEADER.size} bytes, file has {len(buf)}",
                         path=str(path), offset=len(buf))
    magic, version, count, has_labels = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise ParseError(f"bad magic {magic!r}", path=str(path), offset=0)
    if version != VERSION:
        raise ParseError(f"unsupported version {version}", path=str(path), offset=4)
    if has_labels not in (0, 1):
        raise ParseError(f"has_labels flag must be 0 or 1, got {has_labels}",
                         path=str(path), offset=12)

    dtype = _LABELED_DTYPE if has_labels else _POINT_DTYPE
    expected = _HEADER.size + count * dtype.itemsize
    if len(buf) < expected:
        complete = (len(buf) - _HEADER.size) // dtype.itemsize
        raise ParseError(
            f"truncated payload: {count} points declared, {complete} complete",
            path=str(path), offset=_HEADER.size + complete * dtype.itemsize,
        )
    if len(buf) > expected:
        raise ParseError(f"{len(buf) - expected} trailing bytes", path=str(path), offset=expected)

    points = np.frombuffer(buf, dtype=dtype, count=count, offset=_HEADER.size)
    labels = points["label"].astype(np.int64) if has_labels else None
    return _to_cloud(points["xyz"].astype(np.float64), points["rgb"].astype(np.float64),
                     labels, path)


def _write_binary(path: Path, cloud: PointCloud) -> None:
    dtype = _LABELED_DTYPE if cloud.has_labels else _POINT_DTYPE
    points = np.empty(cloud.num_points, dtype=dtype)
    points["xyz"] = cloud.coords
    points["rgb"] = cloud.colors
    if cloud.has_labels:
        points["label"] = cloud.labels
    header = _HEADER.pack(MAGIC, VERSION, cloud.num_points, int(cloud.has_labels))
    path.write_bytes(header + points.tobytes())


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------

def _read_text(path: Path) -> PointCloud:
    rows: list[list[str]] = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        if len(fields) not in (6, 7):
            raise ParseError(f"line {lineno}: expected 6 or 7 columns, got {len(fields)}",
                             path=str(path))
        if rows and len(fields) != len(rows[0]):
            raise ParseError(f"line {lineno}: column count changed", path=str(path))
        rows.append(fields)
    if not rows:
        raise ParseError("no points", path=str(path))

    try:
        values = np.array([[float(v) for v in row[:6]] for row in rows], dtype=np.float32)
        labels = np.array([int(row[6]) for row in rows], dtype=np.int64) if len(rows[0]) == 7 else None
    except ValueError as exc:
        raise ParseError(f"non-numeric value: {exc}", path=str(path)) from exc
    # f32 precision, same as the binary payload
    return _to_cloud(values[:, :3].astype(np.float64), values[:, 3:6].astype(np.float64),
                     labels, path)


def _format_row(coords, colors, label) -> str:
    values = [repr(float(np.float32(v))) for v in (*coords, *colors)]
    if label is not None:
        values.append(str(int(label)))
    return " ".join(values)


def _write_text(path: Path, cloud: PointCloud, labels: np.ndarray | None) -> None:
    lines = [
        _format_row(cloud.coords[i], cloud.colors[i], None if labels is None else labels[i])
        for i in range(cloud.num_points)
    ]
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

def read_block(path: str | Path) -> PointCloud:
    path = Path(path)
    cloud = _read_binary(path) if is_binary(path) else _read_text(path)
    logger.debug("Read %d points from %s", cloud.num_points, path)
    return cloud


def write_block(path: str | Path, cloud: PointCloud) -> None:
    path = Path(path)
    if is_binary(path):
        _write_binary(path, cloud)
    else:
        _write_text(path, cloud, cloud.labels)


def export_predictions(path: str | Path, cloud: PointCloud, predicted: np.ndarray) -> None:
    """Text point file whose last column is the predicted class id."""
    _write_text(Path(path), cloud, np.asarray(predicted, dtype=np.int64))
