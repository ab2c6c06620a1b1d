"""Minimal RIFF/WAVE reader and writer.

Reads mono PCM (16/24/32-bit integer) and IEEE-float (32/64-bit) files,
converting everything to float32 in [-1, 1]. Writes 16-bit signed PCM.
Multichannel input is rejected rather than silently downmixed.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

WAVE_FORMAT_PCM = 1
WAVE_FORMAT_IEEE_FLOAT = 3
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


class WavFormatError(ValueError):
    """Raised for malformed or unsupported WAV files."""


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Read a mono WAV file.

    Returns (samples, sample_rate_hz) with samples as float32 in [-1, 1].
    """
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise WavFormatError(f"{path}: truncated fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            data = body
        # chunks are word-aligned
        pos += 8 + chunk_size + (chunk_size & 1)

    if fmt is None:
        raise WavFormatError(f"{path}: missing fmt chunk")
    if data is None:
        raise WavFormatError(f"{path}: missing data chunk")

    audio_format, n_channels, sample_rate, _, block_align, bits = fmt
    if audio_format == WAVE_FORMAT_EXTENSIBLE:
        # sub-format GUID starts with the u16 format tag
        raise WavFormatError(f"{path}: WAVE_FORMAT_EXTENSIBLE is not supported")
    if n_channels != 1:
        raise WavFormatError(
            f"{path}: expected mono audio, got {n_channels} channels; "
            "downmix or split channels before ingestion"
        )

    if audio_format == WAVE_FORMAT_PCM:
        if bits == 16:
            samples = np.frombuffer(data, dtype="<i2").astype(np.float32) / 32767.0
        elif bits == 24:
            usable = len(data) - len(data) % 3
            b = np.frombuffer(data[:usable], dtype=np.uint8).reshape(-1, 3)
            ints = (
                b[:, 0].astype(np.int32)
                | (b[:, 1].astype(np.int32) << 8)
                | (b[:, 2].astype(np.int32) << 16)
            )
            ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
            samples = ints.astype(np.float32) / float(1 << 23)
        elif bits == 32:
            samples = np.frombuffer(data, dtype="<i4").astype(np.float32) / float(1 << 31)
        else:
            raise WavFormatError(f"{path}: unsupported PCM bit depth {bits}")
    elif audio_format == WAVE_FORMAT_IEEE_FLOAT:
        if bits == 32:
            samples = np.frombuffer(data, dtype="<f4").astype(np.float32)
        elif bits == 64:
            samples = np.frombuffer(data, dtype="<f8").astype(np.float32)
        else:
            raise WavFormatError(f"{path}: unsupported float bit depth {bits}")
    else:
        raise WavFormatError(f"{path}: unsupported format tag {audio_format}")

    if sample_rate <= 0:
        raise WavFormatError(f"{path}: invalid sample rate {sample_rate}")
    return samples, int(sample_rate)


def write_wav(path: str | Path, samples: np.ndarray, sample_rate_hz: int) -> None:
    """Write mono float samples as 16-bit signed PCM, clipping to [-1, 1]."""
    samples = np.asarray(samples)
    if samples.ndim != 1:
        raise WavFormatError(f"{path}: expected 1-D sample array, got shape {samples.shape}")
    if sample_rate_hz <= 0:
        raise WavFormatError(f"{path}: invalid sample rate {sample_rate_hz}")

    clipped = np.clip(samples.astype(np.float64), -1.0, 1.0)
    pcm = np.round(clipped * 32767.0).astype("<i2")
    payload = pcm.tobytes()

    header = b"".join(
        [
            b"RIFF",
            struct.pack("<I", 36 + len(payload)),
            b"WAVE",
            b"fmt ",
            struct.pack("<IHHIIHH", 16, WAVE_FORMAT_PCM, 1, sample_rate_hz,
                        sample_rate_hz * 2, 2, 16),
            b"data",
            struct.pack("<I", len(payload)),
        ]
    )
    Path(path).write_bytes(header + payload)
