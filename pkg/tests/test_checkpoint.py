import struct

import numpy as np
import pytest

from embden.checkpoint import (
    MAGIC,
    Checkpoint,
    CheckpointFormatError,
    load_checkpoint,
    save_checkpoint,
)


def _tensors():
    rng = np.random.default_rng(0)
    return {
        "layer.weight": rng.standard_normal((4, 3)).astype(np.float32),
        "layer.bias": rng.standard_normal(3).astype(np.float32),
    }


def test_round_trip_byte_exact(tmp_path):
    p1 = tmp_path / "a.ckpt"
    p2 = tmp_path / "b.ckpt"
    tensors = _tensors()
    save_checkpoint(p1, "mlp2", {"variant": "mlp2"}, seed=7, step=42, tensors=tensors)
    ckpt = load_checkpoint(p1)
    assert ckpt.arch_id == "mlp2"
    assert ckpt.seed == 7 and ckpt.step == 42
    for name, arr in tensors.items():
        np.testing.assert_array_equal(ckpt.tensors[name], arr)
    save_checkpoint(p2, ckpt.arch_id, ckpt.config, ckpt.seed, ckpt.step, ckpt.tensors)
    assert p1.read_bytes() == p2.read_bytes()


def test_bad_magic(tmp_path):
    p = tmp_path / "bad.ckpt"
    p.write_bytes(b"NOTMAGIC" + b"\x00" * 32)
    with pytest.raises(CheckpointFormatError, match="magic"):
        load_checkpoint(p)


def test_truncated_header(tmp_path):
    p = tmp_path / "t.ckpt"
    p.write_bytes(MAGIC + struct.pack("<I", 1000) + b"{}")
    with pytest.raises(CheckpointFormatError, match="truncated header"):
        load_checkpoint(p)


def test_truncated_blob(tmp_path):
    p = tmp_path / "b.ckpt"
    save_checkpoint(p, "x", {}, 0, 0, _tensors())
    raw = p.read_bytes()
    p.write_bytes(raw[:-8])
    with pytest.raises(CheckpointFormatError, match="truncated blob"):
        load_checkpoint(p)


def test_unaligned_blob(tmp_path):
    p = tmp_path / "u.ckpt"
    save_checkpoint(p, "x", {}, 0, 0, _tensors())
    raw = p.read_bytes()
    p.write_bytes(raw + b"\x00\x00")
    with pytest.raises(CheckpointFormatError, match="aligned"):
        load_checkpoint(p)


def test_version_mismatch(tmp_path):
    p = tmp_path / "v.ckpt"
    header = b'{"format_version": 99, "arch_id": "x", "tensor_index": []}'
    p.write_bytes(MAGIC + struct.pack("<I", len(header)) + header)
    with pytest.raises(CheckpointFormatError, match="version"):
        load_checkpoint(p)
