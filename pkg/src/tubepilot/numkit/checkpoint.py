"""Parameter checkpoint container.

Layout (all integers little-endian):

    bytes 0..3    magic  b"NKPT"
    bytes 4..5    format version (u16), currently 1
    bytes 6..7    reserved (zero)
    bytes 8..15   header length in bytes (u64)
    header        UTF-8 JSON: {"blocks": [{"name", "shape", "offset"}...],
                               "meta": {...}}
    payload       raw float64 little-endian values, block by block
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .tensor import Tensor

MAGIC = b"NKPT"
VERSION = 1


def save_checkpoint(path, params: dict[str, Tensor | np.ndarray], meta: dict | None = None) -> None:
    blocks = []
    offset = 0
    arrays = []
    for name, p in params.items():
        raw = p.data if isinstance(p, Tensor) else p
        arr = np.ascontiguousarray(raw, dtype="<f8")  # promotes 0-d to 1-d
        blocks.append({"name": name, "shape": list(np.shape(raw)), "offset": offset})
        offset += arr.size
        arrays.append(arr)
    header = json.dumps({"blocks": blocks, "meta": meta or {}},
                        sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<HH", VERSION, 0))
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for arr in arrays:
            f.write(arr.tobytes())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise ValueError(f"not a checkpoint file: bad magic {magic!r}")
        version, _ = struct.unpack("<HH", f.read(4))
        if version != VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        (header_len,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(header_len).decode("utf-8"))
        payload = f.read()
    data = np.frombuffer(payload, dtype="<f8")
    out: dict[str, np.ndarray] = {}
    for block in header["blocks"]:
        shape = tuple(block["shape"])
        n = int(np.prod(shape)) if shape else 1
        start = block["offset"]
        out[block["name"]] = data[start:start + n].reshape(shape).astype(np.float64)
    return out, header["meta"]
