"""
Binary ParamSet checkpoints.

Layout (all integers little-endian):
  header   uint32 format version, uint32 entry count
  entry    uint32 path length, path bytes (UTF-8),
           uint32 rank, rank x uint64 extents,
           product(extents) x float64 values (little-endian, row-major)

Round trips are bit-exact.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

from metakit.autodiff.tensor import Tensor
from metakit.config import CHECKPOINT_FORMAT_VERSION
from metakit.core.errors import IngestionError
from metakit.core.logging import get_logger
from metakit.nn.params import ParamSet

logger = get_logger(__name__)

_U32 = struct.Struct("<I")
_HEADER = struct.Struct("<II")


def encode_params(params: ParamSet) -> bytes:
    chunks = [_HEADER.pack(CHECKPOINT_FORMAT_VERSION, len(params))]
    for path, tensor in params.items():
        raw_path = path.encode("utf-8")
        chunks.append(_U32.pack(len(raw_path)))
        chunks.append(raw_path)
        chunks.append(_U32.pack(tensor.ndim))
        chunks.append(struct.pack(f"<{tensor.ndim}Q", *tensor.shape))
        chunks.append(np.ascontiguousarray(tensor.values, dtype="<f8").tobytes())
    return b"".join(chunks)


class _Reader:
    def __init__(self, data: bytes, source: str):
        self.data = data
        self.offset = 0
        self.source = source

    def take(self, size: int) -> bytes:
        end = self.offset + size
        if end > len(self.data):
            raise IngestionError(f"truncated checkpoint: {self.source}")
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, fmt: struct.Struct | str) -> tuple:
        layout = fmt if isinstance(fmt, struct.Struct) else struct.Struct(fmt)
        return layout.unpack(self.take(layout.size))


def decode_params(data: bytes, source: str = "<bytes>") -> ParamSet:
    reader = _Reader(data, source)
    version, count = reader.unpack(_HEADER)
    if version != CHECKPOINT_FORMAT_VERSION:
        raise IngestionError(
            f"unsupported checkpoint version {version} "
            f"(expected {CHECKPOINT_FORMAT_VERSION}): {source}"
        )
    pairs = []
    for _ in range(count):
        (path_length,) = reader.unpack(_U32)
        try:
            path = reader.take(path_length).decode("utf-8")
        except UnicodeDecodeError as e:
            raise IngestionError(f"invalid parameter path: {source}") from e
        (rank,) = reader.unpack(_U32)
        shape = reader.unpack(f"<{rank}Q")
        values = np.frombuffer(reader.take(8 * math.prod(shape)), dtype="<f8")
        pairs.append((path, Tensor(values.reshape(shape))))
    if reader.offset != len(data):
        raise IngestionError(f"trailing bytes after {count} entries: {source}")
    return ParamSet.from_pairs(pairs)


def save_params(params: ParamSet, path: str | Path) -> Path:
    target = Path(path)
    try:
        target.write_bytes(encode_params(params))
    except OSError as e:
        raise IngestionError(f"Failed to write checkpoint: {target}") from e
    logger.info("Checkpoint written: %s (%d entries)", target, len(params))
    return target


def load_params(path: str | Path) -> ParamSet:
    source = Path(path)
    try:
        data = source.read_bytes()
    except OSError as e:
        raise IngestionError(f"Checkpoint not found or unreadable: {source}") from e
    return decode_params(data, str(source))
