"""Binary parameter checkpoint format.

Layout (all integers little-endian):

    magic    4 bytes  b"CPMN"
    version  u16      currently 1
    records  repeated until EOF:
        name_len  u32
        name      UTF-8 bytes
        rank      u32
        dims      u32 * rank
        values    float64 little-endian, C order

Tensor names are written in sorted order so identical parameter sets produce
byte-identical files.
"""
from __future__ import annotations

import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from ..errors import CheckpointError

MAGIC = b"CPMN"
VERSION = 1


def save_tensors(path: str | Path, tensors: Mapping[str, np.ndarray]) -> None:
    out = bytearray()
    out += MAGIC
    out += struct.pack("<H", VERSION)
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f8")
        encoded = name.encode("utf-8")
        out += struct.pack("<I", len(encoded))
        out += encoded
        out += struct.pack("<I", arr.ndim)
        out += struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += arr.tobytes()
    Path(path).write_bytes(bytes(out))


def load_tensors(path: str | Path) -> dict[str, np.ndarray]:
    raw = Path(path).read_bytes()
    if len(raw) < 6 or raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a parameter checkpoint (bad magic)")
    (version,) = struct.unpack_from("<H", raw, 4)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    offset = 6
    tensors: dict[str, np.ndarray] = {}
    while offset < len(raw):
        try:
            (name_len,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            name = raw[offset:offset + name_len].decode("utf-8")
            if len(raw) < offset + name_len:
                raise struct.error("truncated name")
            offset += name_len
            (rank,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            dims = struct.unpack_from(f"<{rank}I", raw, offset)
            offset += 4 * rank
            count = int(np.prod(dims)) if rank else 1
            end = offset + 8 * count
            if end > len(raw):
                raise struct.error("truncated values")
            values = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
            offset = end
        except (struct.error, UnicodeDecodeError) as exc:
            raise CheckpointError(f"{path}: truncated or corrupt checkpoint ({exc})") from exc
        tensors[name] = values.reshape(dims).astype(np.float64)
    return tensors
