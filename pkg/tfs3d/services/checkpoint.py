"""Record files: parameter checkpoints and feature dumps.

Layout (little-endian):

    magic      4 bytes  b"TFQT"
    version    u32      1
    count      u32      number of records
    record     u32 name length, UTF-8 name, u32 ndim, ndim x u64 dims,
               row-major float64 payload

Round trips are bit-exact.
"""

from __future__ import annotations

import logging
import struct
from pathlib import Path

import numpy as np

from tfs3d.errors import CheckpointError
from tfs3d.services.quest import AdamState, QuestParameters

logger = logging.getLogger(__name__)

MAGIC = b"TFQT"
VERSION = 1

_ADAM_M = "adam.m."
_ADAM_V = "adam.v."
_ADAM_STEP = "adam.step"


def write_records(path: str | Path, records: dict[str, np.ndarray]) -> None:
    chunks = [MAGIC, struct.pack("<II", VERSION, len(records))]
    for name, array in records.items():
        data = np.ascontiguousarray(array, dtype="<f8")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", data.ndim))
        chunks.append(struct.pack(f"<{data.ndim}Q", *data.shape))
        chunks.append(data.tobytes())
    Path(path).write_bytes(b"".join(chunks))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, size: int, what: str, record: str | None) -> bytes:
        if self.pos + size > len(self.buf):
            raise CheckpointError(
                f"truncated {what} at byte {self.pos} (need {size}, have {len(self.buf) - self.pos})",
                record=record,
            )
        chunk = self.buf[self.pos:self.pos + size]
        self.pos += size
        return chunk


def read_records(path: str | Path) -> dict[str, np.ndarray]:
    reader = _Reader(Path(path).read_bytes())
    if reader.take(4, "magic", None) != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a record file")
    version, count = struct.unpack("<II", reader.take(8, "header", None))
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")

    records: dict[str, np.ndarray] = {}
    for index in range(count):
        label = f"#{index}"
        (name_len,) = struct.unpack("<I", reader.take(4, "name length", label))
        try:
            name = reader.take(name_len, "name", label).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CheckpointError("record name is not valid UTF-8", record=label) from exc
        (ndim,) = struct.unpack("<I", reader.take(4, "rank", name))
        shape = struct.unpack(f"<{ndim}Q", reader.take(8 * ndim, "shape", name))
        size = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        payload = reader.take(8 * size, "payload", name)
        records[name] = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(shape)
    if reader.pos != len(reader.buf):
        raise CheckpointError(f"{path}: {len(reader.buf) - reader.pos} trailing bytes")
    return records


def save_checkpoint(path: str | Path, params: QuestParameters) -> None:
    records = dict(params.tensors)
    for name, m in params.adam.m.items():
        records[_ADAM_M + name] = m
    for name, v in params.adam.v.items():
        records[_ADAM_V + name] = v
    records[_ADAM_STEP] = np.array([float(params.adam.step)])
    write_records(path, records)
    logger.info("Checkpoint written to %s (%d parameters)", path, params.num_parameters())


def load_checkpoint(path: str | Path) -> QuestParameters:
    records = read_records(path)
    tensors: dict[str, np.ndarray] = {}
    adam = AdamState()
    for name, array in records.items():
        if name.startswith(_ADAM_M):
            adam.m[name[len(_ADAM_M):]] = array
        elif name.startswith(_ADAM_V):
            adam.v[name[len(_ADAM_V):]] = array
        elif name == _ADAM_STEP:
            adam.step = int(array[0])
        else:
            if not np.all(np.isfinite(array)):
                raise CheckpointError("non-finite values", record=name)
            tensors[name] = array
    for required in ("w_q", "w_k", "w_v", "w_out", "fc0.scale", "fc0.shift"):
        if required not in tensors:
            raise CheckpointError(f"{path}: missing tensor", record=required)
    return QuestParameters(tensors=tensors, adam=adam)
