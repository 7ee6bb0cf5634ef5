"""Versioned tensor checkpoint.

Layout::

    b"BRDGCKPT" | uint32 version | uint64 header length | JSON header | raw data

The header lists ``{"name", "dtype", "shape"}`` per tensor in storage order
plus a free-form ``meta`` object. Tensors are stored little-endian, C order.
Writing the same tensors twice yields identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"BRDGCKPT"
VERSION = 1


def save_tensors(path, tensors: dict, meta: dict | None = None) -> None:
    entries, blobs = [], []
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        entries.append({"name": name, "dtype": le.dtype.str, "shape": list(arr.shape)})
        blobs.append(np.ascontiguousarray(le).tobytes())
    header = json.dumps({"meta": meta or {}, "tensors": entries}, sort_keys=True).encode()
    with Path(path).open("wb") as fh:
        fh.write(MAGIC + struct.pack("<IQ", VERSION, len(header)) + header)
        for b in blobs:
            fh.write(b)


def load_tensors(path) -> tuple[dict, dict]:
    """Return ``(tensors, meta)``."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint not found: {path}")
    raw = path.read_bytes()
    if raw[:8] != MAGIC:
        raise DataError(f"{path} is not a bridgecast checkpoint")
    try:
        version, hlen = struct.unpack_from("<IQ", raw, 8)
        header = json.loads(raw[8 + struct.calcsize("<IQ") :][:hlen])
    except (struct.error, ValueError) as e:
        raise DataError(f"{path}: unreadable checkpoint header ({e})") from None
    if version != VERSION:
        raise DataError(f"unsupported checkpoint version {version}")
    pos = 8 + struct.calcsize("<IQ") + hlen
    tensors = {}
    for e in header["tensors"]:
        dt = np.dtype(e["dtype"])
        count = int(np.prod(e["shape"], dtype=np.int64))
        if pos + count * dt.itemsize > len(raw):
            raise DataError(f"{path}: truncated tensor data for {e['name']!r}")
        arr = np.frombuffer(raw, dtype=dt, count=count, offset=pos).reshape(e["shape"])
        tensors[e["name"]] = arr.astype(dt.newbyteorder("="), copy=True)
        pos += count * dt.itemsize
    if pos != len(raw):
        raise DataError(f"{path}: trailing or truncated tensor data")
    return tensors, header["meta"]
