"""Audio encoders: the built-in log-mel (LMS) encoder and EMB1 file I/O.

External pre-trained encoders are interfaced through EMB1 embedding
files rather than live inference, so their outputs behave as
reproducible fixtures. The registry maps encoder ids to dimensions and
frame rates; "lms" is the only built-in.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp import INTERNAL_RATE_HZ, DspError, MelConfig, StftConfig, Waveform, log_mel

EMB_MAGIC = b"EMB1"
EMB_VERSION = 1

LMS_STFT = StftConfig(n_fft=1024, hop=256, center=True)
LMS_MEL = MelConfig(n_mels=100, f_min_hz=0.0, f_max_hz=8000.0, log_floor=1e-10)


class EmbeddingFormatError(ValueError):
    """Raised for malformed EMB1 files."""


@dataclass(frozen=True)
class EmbeddingSequence:
    """Frame-level embedding matrix with rate and provenance metadata."""

    data: np.ndarray
    frame_rate_hz: float
    encoder_id: str

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise ValueError(f"embeddings must be (frames, dim), got shape {data.shape}")
        if data.shape[1] == 0:
            raise ValueError("embedding dim must be positive")
        if data.shape[0] == 0:
            raise ValueError("zero-length embedding sequences are not accepted")
        if not np.isfinite(data).all():
            raise ValueError("embeddings contain non-finite values")
        if self.frame_rate_hz <= 0:
            raise ValueError(f"frame rate must be positive, got {self.frame_rate_hz}")
        object.__setattr__(self, "data", data)

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class EncoderDescriptor:
    encoder_id: str
    dim: int
    frame_rate_hz: float
    source: str  # "builtin_lms" | "external_file"


_REGISTRY: dict[str, EncoderDescriptor] = {}


def register_encoder(desc: EncoderDescriptor) -> None:
    existing = _REGISTRY.get(desc.encoder_id)
    if existing is not None and existing != desc:
        raise ValueError(
            f"encoder id {desc.encoder_id!r} already registered with different properties"
        )
    _REGISTRY[desc.encoder_id] = desc


def encoder_descriptor(encoder_id: str) -> EncoderDescriptor:
    try:
        return _REGISTRY[encoder_id]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise KeyError(f"unknown encoder {encoder_id!r} (known: {known})") from None


register_encoder(
    EncoderDescriptor("lms", dim=LMS_MEL.n_mels,
                      frame_rate_hz=INTERNAL_RATE_HZ / LMS_STFT.hop, source="builtin_lms")
)
for _ext in ("wavlm_base", "whisper_small", "dasheng_base"):
    register_encoder(EncoderDescriptor(_ext, dim=768, frame_rate_hz=50.0,
                                       source="external_file"))


def lms_encode(w: Waveform) -> EmbeddingSequence:
    """100-dim log-mel embedding at 62.5 Hz; input must be 16 kHz."""
    if w.sample_rate_hz != INTERNAL_RATE_HZ:
        raise DspError(
            f"lms encoder expects {INTERNAL_RATE_HZ} Hz input, got {w.sample_rate_hz} Hz; "
            "resample first"
        )
    feats = log_mel(w, LMS_STFT, LMS_MEL).astype(np.float32)
    return EmbeddingSequence(feats, INTERNAL_RATE_HZ / LMS_STFT.hop, "lms")


def write_embeddings(seq: EmbeddingSequence, path) -> None:
    """Serialize to EMB1: magic | u32 version | u32 dim | u32 frames |
    f32 frame_rate | u8-length-prefixed encoder id | f32 LE row-major data."""
    enc_id = seq.encoder_id.encode("utf-8")
    if len(enc_id) > 255:
        raise EmbeddingFormatError(f"encoder id too long ({len(enc_id)} bytes)")
    payload = np.ascontiguousarray(seq.data, dtype="<f4").tobytes()
    with open(path, "wb") as f:
        f.write(EMB_MAGIC)
        f.write(struct.pack("<III", EMB_VERSION, seq.dim, seq.frames))
        f.write(struct.pack("<f", float(seq.frame_rate_hz)))
        f.write(struct.pack("B", len(enc_id)))
        f.write(enc_id)
        f.write(payload)


def read_embeddings(path) -> EmbeddingSequence:
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != EMB_MAGIC:
        raise EmbeddingFormatError(f"{path}: bad magic, not an EMB1 file")
    if len(raw) < 21:
        raise EmbeddingFormatError(f"{path}: truncated header")
    version, dim, n_frames = struct.unpack_from("<III", raw, 4)
    if version != EMB_VERSION:
        raise EmbeddingFormatError(f"{path}: unsupported version {version}")
    if dim == 0:
        raise EmbeddingFormatError(f"{path}: dim field is zero")
    (frame_rate,) = struct.unpack_from("<f", raw, 16)
    (id_len,) = struct.unpack_from("B", raw, 20)
    if len(raw) < 21 + id_len:
        raise EmbeddingFormatError(f"{path}: truncated encoder id")
    encoder_id = raw[21 : 21 + id_len].decode("utf-8")

    payload = raw[21 + id_len :]
    expected = 4 * dim * n_frames
    if len(payload) != expected:
        if n_frames > 0 and len(payload) % (4 * n_frames) == 0:
            implied = len(payload) // (4 * n_frames)
            raise EmbeddingFormatError(
                f"{path}: dim mismatch, header says {dim} but payload implies {implied}"
            )
        raise EmbeddingFormatError(
            f"{path}: truncated payload, expected {expected} bytes, found {len(payload)}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(n_frames, dim).copy()
    return EmbeddingSequence(data, float(frame_rate), encoder_id)
