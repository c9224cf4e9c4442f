"""Versioned weight checkpoints.

Byte layout (documented here and in the README):

    bytes 0..7    magic b"DSGNNCP1"
    bytes 8..15   header length H, little-endian uint64
    bytes 16..16+H-1 UTF-8 JSON header:
        {
          "format_version": 1,
          "meta": {...},                      # config echo, epoch, step, ...
          "tensors": [{"name": str, "shape": [int, ...], "offset": int}, ...]
        }
    remainder     payload: float64 little-endian, C (row-major) order;
                  each tensor starts at 8*offset bytes into the payload.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import CheckpointError

MAGIC = b"DSGNNCP1"
FORMAT_VERSION = 1


def save_checkpoint(path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    entries = []
    offset = 0
    chunks = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size
        chunks.append(arr.tobytes())
    header = json.dumps(
        {"format_version": FORMAT_VERSION, "meta": meta, "tensors": entries},
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as handle:
        handle.write(MAGIC)
        handle.write(struct.pack("<Q", len(header)))
        handle.write(header)
        for chunk in chunks:
            handle.write(chunk)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as handle:
        blob = handle.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    (header_len,) = struct.unpack("<Q", blob[8:16])
    try:
        header = json.loads(blob[16 : 16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from None
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: format version {header.get('format_version')} "
            f"not supported (expected {FORMAT_VERSION})"
        )
    payload = blob[16 + header_len :]
    arrays = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) if shape else 1
        start = 8 * entry["offset"]
        flat = np.frombuffer(payload, dtype="<f8", count=size, offset=start)
        arrays[entry["name"]] = flat.reshape(shape).astype(np.float64)
    return arrays, header["meta"]
