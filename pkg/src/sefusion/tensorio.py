"""Flat binary container for named float64 tensors.

Layout (all little-endian):
    magic   8 bytes  b"SEFTNSR1"
    version u32      (currently 1)
    count   u32
    then per tensor:
    name_len u16, name utf-8, rank u8, dims u32 * rank, payload f64 * prod(dims)
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import TensorFormatError

_MAGIC = b"SEFTNSR1"
_VERSION = 1


def save_tensors(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    blob = bytearray()
    blob += _MAGIC
    blob += struct.pack("<II", _VERSION, len(tensors))
    for name, tensor in tensors.items():
        arr = np.ascontiguousarray(tensor, dtype=np.float64)
        encoded = name.encode("utf-8")
        blob += struct.pack("<H", len(encoded))
        blob += encoded
        blob += struct.pack("<B", arr.ndim)
        blob += struct.pack(f"<{arr.ndim}I", *arr.shape)
        blob += arr.astype("<f8").tobytes()
    Path(path).write_bytes(bytes(blob))


def load_tensors(path: str | Path) -> dict[str, np.ndarray]:
    raw = Path(path).read_bytes()
    if len(raw) < len(_MAGIC) + 8 or raw[: len(_MAGIC)] != _MAGIC:
        raise TensorFormatError(f"{path}: not a tensor container (bad magic)")
    offset = len(_MAGIC)
    version, count = struct.unpack_from("<II", raw, offset)
    offset += 8
    if version != _VERSION:
        raise TensorFormatError(f"{path}: unsupported container version {version}")
    tensors: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", raw, offset)
            offset += 2
            name = raw[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<B", raw, offset)
            offset += 1
            dims = struct.unpack_from(f"<{rank}I", raw, offset)
            offset += 4 * rank
            n = int(np.prod(dims)) if rank else 1
            payload = np.frombuffer(raw, dtype="<f8", count=n, offset=offset)
            if payload.size != n:
                raise TensorFormatError(f"{path}: truncated payload for {name!r}")
            offset += 8 * n
            tensors[name] = payload.reshape(dims).astype(np.float64)
    except (struct.error, UnicodeDecodeError, ValueError) as exc:
        raise TensorFormatError(f"{path}: corrupt tensor container ({exc})") from exc
    if offset != len(raw):
        raise TensorFormatError(f"{path}: {len(raw) - offset} trailing bytes")
    return tensors
