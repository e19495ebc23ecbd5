"""Flat binary tensor files used for checkpoints and saved maps.

Layout: a 16-byte header ``struct.pack("<4sI4H", b"SECO", rank, d0, d1,
d2, d3)`` followed by the float32 payload, little-endian, row-major.
Rank is at most 4 and unused dims are zero. Dims are uint16, which caps
any single axis at 65535; model parameters and rendered maps fit with
plenty of room.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"SECO"
HEADER_FMT = "<4sI4H"
HEADER_SIZE = struct.calcsize(HEADER_FMT)
MAX_RANK = 4
MAX_DIM = 0xFFFF


class BlobFormatError(ValueError):
    """Raised when a blob file fails header or size validation."""


def write_blob(path, array: np.ndarray) -> None:
    """Write a float-convertible array of rank 1..4 as a float32 blob."""
    arr = np.asarray(array)
    if arr.ndim == 0 or arr.ndim > MAX_RANK:
        raise BlobFormatError(f"rank must be 1..{MAX_RANK}, got {arr.ndim}")
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    for d in arr.shape:
        if d > MAX_DIM:
            raise BlobFormatError(f"dim {d} exceeds uint16 range")
    dims = list(arr.shape) + [0] * (MAX_RANK - arr.ndim)
    header = struct.pack(HEADER_FMT, MAGIC, arr.ndim, *dims)
    with open(path, "wb") as f:
        f.write(header)
        f.write(arr.astype("<f4", copy=False).tobytes(order="C"))


def read_blob(path) -> np.ndarray:
    """Read a blob file back as a float32 array with its stored shape."""
    data = Path(path).read_bytes()
    if len(data) < HEADER_SIZE:
        raise BlobFormatError(f"{path}: truncated header ({len(data)} bytes)")
    magic, rank, d0, d1, d2, d3 = struct.unpack(HEADER_FMT, data[:HEADER_SIZE])
    if magic != MAGIC:
        raise BlobFormatError(f"{path}: bad magic {magic!r}")
    if rank == 0 or rank > MAX_RANK:
        raise BlobFormatError(f"{path}: bad rank {rank}")
    dims = (d0, d1, d2, d3)
    shape = dims[:rank]
    if any(d == 0 for d in shape) or any(d != 0 for d in dims[rank:]):
        raise BlobFormatError(f"{path}: inconsistent dims {dims} for rank {rank}")
    count = int(np.prod(shape))
    expected = HEADER_SIZE + 4 * count
    if len(data) != expected:
        raise BlobFormatError(
            f"{path}: payload size {len(data) - HEADER_SIZE} does not match "
            f"shape {shape} ({4 * count} bytes expected)"
        )
    flat = np.frombuffer(data, dtype="<f4", count=count, offset=HEADER_SIZE)
    return flat.reshape(shape).astype(np.float32, copy=True)
