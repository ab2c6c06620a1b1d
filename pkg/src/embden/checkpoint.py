"""CKPT1 binary checkpoint format.

Layout: 8-byte magic "EMDCKPT1" | u32 LE header length | UTF-8 JSON
header | contiguous float32 LE blob. The header carries format_version,
arch_id, config, seed, step, and a tensor_index of {name, shape, offset}
records with offsets counted in float32 elements from the blob start.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"EMDCKPT1"
FORMAT_VERSION = 1


class CheckpointFormatError(ValueError):
    """Raised for malformed or inconsistent checkpoint files."""


@dataclass
class Checkpoint:
    arch_id: str
    config: dict
    seed: int
    step: int
    tensors: dict[str, np.ndarray]


def save_checkpoint(path, arch_id: str, config: dict, seed: int, step: int,
                    tensors: dict[str, np.ndarray]) -> None:
    index = []
    offset = 0
    blobs = []
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        index.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size
        blobs.append(arr.tobytes())
    header = json.dumps(
        {
            "format_version": FORMAT_VERSION,
            "arch_id": arch_id,
            "config": config,
            "seed": seed,
            "step": step,
            "tensor_index": index,
        },
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        for blob in blobs:
            f.write(blob)


def load_checkpoint(path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) or raw[: len(MAGIC)] != MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic, not a CKPT1 checkpoint")
    if len(raw) < len(MAGIC) + 4:
        raise CheckpointFormatError(f"{path}: truncated header length field")
    (header_len,) = struct.unpack_from("<I", raw, len(MAGIC))
    header_start = len(MAGIC) + 4
    if len(raw) < header_start + header_len:
        raise CheckpointFormatError(f"{path}: truncated header")
    try:
        header = json.loads(raw[header_start : header_start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointFormatError(f"{path}: unreadable header ({e})") from None
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointFormatError(
            f"{path}: unsupported format version {header.get('format_version')}"
        )

    blob = raw[header_start + header_len :]
    n_floats = len(blob) // 4
    if len(blob) % 4:
        raise CheckpointFormatError(f"{path}: blob length {len(blob)} not float32-aligned")
    flat = np.frombuffer(blob, dtype="<f4")

    tensors = {}
    for rec in header.get("tensor_index", []):
        name, shape, offset = rec["name"], tuple(rec["shape"]), int(rec["offset"])
        size = int(np.prod(shape)) if shape else 1
        if offset + size > n_floats:
            raise CheckpointFormatError(
                f"{path}: truncated blob, tensor {name!r} needs elements "
                f"[{offset}, {offset + size}) of {n_floats}"
            )
        tensors[name] = flat[offset : offset + size].reshape(shape).copy()
    return Checkpoint(
        arch_id=header["arch_id"],
        config=header.get("config", {}),
        seed=int(header.get("seed", 0)),
        step=int(header.get("step", 0)),
        tensors=tensors,
    )
