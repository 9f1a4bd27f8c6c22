"""SFTENSOR binary format.

Layout: 8-byte magic ``SFTENSOR``, little-endian u32 rank, ``rank`` little-endian
u64 dimensions, then the values as little-endian float64 in row-major order.
"""

from __future__ import annotations

import os
import struct
from typing import BinaryIO

import numpy as np

MAGIC = b"SFTENSOR"


class TensorFormatError(ValueError):
    pass


def encode_tensor(array) -> bytes:
    a = np.array(array, dtype="<f8", order="C")  # keeps 0-d arrays 0-d
    header = MAGIC + struct.pack("<I", a.ndim) + struct.pack(f"<{a.ndim}Q", *a.shape)
    return header + a.tobytes(order="C")


def decode_tensor(buf: bytes) -> np.ndarray:
    if buf[:8] != MAGIC:
        raise TensorFormatError("missing SFTENSOR magic")
    try:
        (rank,) = struct.unpack_from("<I", buf, 8)
        dims = struct.unpack_from(f"<{rank}Q", buf, 12)
    except struct.error as exc:
        raise TensorFormatError(f"truncated header: {exc}") from None
    start = 12 + 8 * rank
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    if len(buf) - start != 8 * count:
        raise TensorFormatError(f"payload holds {len(buf) - start} bytes, expected {8 * count}")
    return np.frombuffer(buf, dtype="<f8", count=count, offset=start).reshape(dims).astype(np.float64)


def write_tensor(path: str | os.PathLike | BinaryIO, array) -> None:
    data = encode_tensor(array)
    if hasattr(path, "write"):
        path.write(data)
        return
    with open(path, "wb") as fh:
        fh.write(data)


def read_tensor(path: str | os.PathLike | BinaryIO) -> np.ndarray:
    if hasattr(path, "read"):
        return decode_tensor(path.read())
    with open(path, "rb") as fh:
        return decode_tensor(fh.read())
