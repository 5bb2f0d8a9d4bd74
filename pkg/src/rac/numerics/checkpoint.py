"""Array container files: JSON header + raw little-endian float buffers.

Layout:

    8-byte magic  "RACTENS1"
    8-byte little-endian uint64: header length in bytes
    header JSON (utf-8, sorted keys):
        {"arrays": {name: {"shape": [...], "dtype": "<f8"|"<f4",
                           "offset": int, "nbytes": int}},
         "meta": {...}}
    data region: buffers at the stated offsets (relative to the region start)

Round-trips are bit-exact; equal inputs produce byte-identical files.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"RACTENS1"

_DTYPES = {"<f8": np.dtype("<f8"), "<f4": np.dtype("<f4")}


class CheckpointError(ValueError):
    pass


def save_arrays(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    entries = {}
    offset = 0
    names = sorted(arrays)
    buffers = []
    for name in names:
        arr = np.asarray(arrays[name])
        if arr.dtype == np.float32:
            arr = arr.astype("<f4")
            dtype = "<f4"
        else:
            arr = arr.astype("<f8")
            dtype = "<f8"
        buf = np.ascontiguousarray(arr).tobytes()
        entries[name] = {
            "shape": list(arr.shape),
            "dtype": dtype,
            "offset": offset,
            "nbytes": len(buf),
        }
        buffers.append(buf)
        offset += len(buf)
    header = json.dumps(
        {"arrays": entries, "meta": meta or {}}, sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for buf in buffers:
            fh.write(buf)


def load_arrays(path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    raw = path.read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a tensor container (bad magic)")
    (header_len,) = struct.unpack("<Q", raw[8:16])
    header = json.loads(raw[16 : 16 + header_len].decode("utf-8"))
    data = raw[16 + header_len :]
    arrays = {}
    for name, entry in header["arrays"].items():
        dtype = _DTYPES.get(entry["dtype"])
        if dtype is None:
            raise CheckpointError(f"{path}: unsupported dtype {entry['dtype']!r} for {name!r}")
        start, nbytes = entry["offset"], entry["nbytes"]
        arr = np.frombuffer(data[start : start + nbytes], dtype=dtype).reshape(entry["shape"])
        arrays[name] = arr.copy()
    return arrays, header.get("meta", {})
