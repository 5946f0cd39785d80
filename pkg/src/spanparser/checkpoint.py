"""SPCK1 checkpoint files.

Layout: magic ``SPCK1\\0``, u32 version (=1), u64 metadata length, UTF-8 JSON
metadata, then one record per tensor: u16 name length, name bytes, u8 rank,
u32 dims, little-endian float32 payload. Loading then saving reproduces the
tensor payload bytes exactly.
"""

from __future__ import annotations

import json
import struct
from typing import Mapping

import numpy as np

MAGIC = b"SPCK1\x00"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path: str, metadata: dict, tensors: Mapping[str, np.ndarray]) -> None:
    meta_blob = json.dumps(metadata, sort_keys=True, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(meta_blob)))
        fh.write(meta_blob)
        for name, arr in tensors.items():
            name_b = name.encode("utf-8")
            arr = np.ascontiguousarray(arr, dtype="<f4")
            fh.write(struct.pack("<H", len(name_b)))
            fh.write(name_b)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path: str) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not an SPCK1 file")
    off = len(MAGIC)
    (version,) = struct.unpack_from("<I", blob, off)
    off += 4
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    (meta_len,) = struct.unpack_from("<Q", blob, off)
    off += 8
    if off + meta_len > len(blob):
        raise CheckpointError(f"{path}: truncated metadata")
    metadata = json.loads(blob[off : off + meta_len].decode("utf-8"))
    off += meta_len
    tensors: dict[str, np.ndarray] = {}
    while off < len(blob):
        if off + 2 > len(blob):
            raise CheckpointError(f"{path}: truncated record header")
        (name_len,) = struct.unpack_from("<H", blob, off)
        off += 2
        name = blob[off : off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<B", blob, off)
        off += 1
        dims = struct.unpack_from(f"<{rank}I", blob, off)
        off += 4 * rank
        count = int(np.prod(dims)) if rank else 1
        nbytes = 4 * count
        if off + nbytes > len(blob):
            raise CheckpointError(f"{path}: truncated payload for {name!r}")
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=off).reshape(dims)
        off += nbytes
        if name in tensors:
            raise CheckpointError(f"{path}: duplicate tensor name {name!r}")
        tensors[name] = arr.copy()
    return metadata, tensors
