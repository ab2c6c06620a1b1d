"""Objective evaluation: STOI, SI-SNR, log-spectral distance, embedding
MSE, and speaker cosine similarity.

STOI follows the classic intrusive recipe: both signals resampled to
10 kHz, silent frames removed by a 40 dB clean-energy gate, 256-sample
Hann frames with a 512-point FFT at 50% overlap, 15 one-third-octave
bands from 150 Hz, and clipped (-15 dB) energy-normalized correlations
over 30-frame segments averaged across bands and segments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dsp import StftConfig, Waveform, resample, stft

STOI_RATE_HZ = 10_000
STOI_FRAME = 256
STOI_FFT = 512
STOI_HOP = 128
STOI_BANDS = 15
STOI_FIRST_CENTER_HZ = 150.0
STOI_SEGMENT_FRAMES = 30  # 384 ms at 10 kHz
STOI_DYNAMIC_RANGE_DB = 40.0
STOI_CLIP_DB = -15.0

SI_SNR_CAP_DB = 60.0

MIN_STOI_SECONDS = STOI_SEGMENT_FRAMES * STOI_HOP / STOI_RATE_HZ  # 0.384


class MetricError(ValueError):
    """Raised for inputs a metric cannot score."""


def _matlab_hanning(n: int) -> np.ndarray:
    # symmetric hann without the zero endpoints
    return np.hanning(n + 2)[1:-1]


def _remove_silent_frames(clean: np.ndarray, other: np.ndarray):
    """Drop frames whose clean energy is 40 dB under the loudest frame."""
    w = _matlab_hanning(STOI_FRAME)
    starts = np.arange(0, clean.size - STOI_FRAME + 1, STOI_HOP)
    if starts.size == 0:
        raise MetricError(
            f"stoi needs at least {MIN_STOI_SECONDS:.3f} s of signal after resampling"
        )
    frames_c = np.stack([clean[s : s + STOI_FRAME] * w for s in starts])
    frames_o = np.stack([other[s : s + STOI_FRAME] * w for s in starts])
    energy_db = 20.0 * np.log10(np.linalg.norm(frames_c, axis=1) + 1e-12)
    keep = energy_db > energy_db.max() - STOI_DYNAMIC_RANGE_DB

    frames_c = frames_c[keep]
    frames_o = frames_o[keep]
    n_out = (frames_c.shape[0] - 1) * STOI_HOP + STOI_FRAME if frames_c.shape[0] else 0
    out_c = np.zeros(n_out)
    out_o = np.zeros(n_out)
    for i in range(frames_c.shape[0]):
        out_c[i * STOI_HOP : i * STOI_HOP + STOI_FRAME] += frames_c[i]
        out_o[i * STOI_HOP : i * STOI_HOP + STOI_FRAME] += frames_o[i]
    return out_c, out_o


def _third_octave_matrix() -> np.ndarray:
    freqs = np.arange(STOI_FFT // 2 + 1) * (STOI_RATE_HZ / STOI_FFT)
    centers = STOI_FIRST_CENTER_HZ * 2.0 ** (np.arange(STOI_BANDS) / 3.0)
    matrix = np.zeros((STOI_BANDS, freqs.size))
    for k, cf in enumerate(centers):
        lo, hi = cf * 2 ** (-1 / 6), cf * 2 ** (1 / 6)
        matrix[k] = (freqs >= lo) & (freqs < hi)
    return matrix


def _band_envelopes(x: np.ndarray) -> np.ndarray:
    w = _matlab_hanning(STOI_FRAME)
    starts = np.arange(0, x.size - STOI_FRAME + 1, STOI_HOP)
    frames = np.stack([x[s : s + STOI_FRAME] * w for s in starts])
    spec = np.fft.rfft(frames, n=STOI_FFT, axis=1)
    power = np.abs(spec) ** 2
    return np.sqrt(power @ _third_octave_matrix().T + 1e-20)  # (frames, bands)


def stoi(clean: Waveform, processed: Waveform) -> float:
    """Short-time objective intelligibility of `processed` given `clean`."""
    if len(clean) != len(processed):
        raise MetricError(
            f"stoi expects equal lengths after alignment, got {len(clean)} vs {len(processed)}"
        )
    if clean.duration_s < MIN_STOI_SECONDS:
        raise MetricError(
            f"stoi needs at least {MIN_STOI_SECONDS:.3f} s of audio, "
            f"got {clean.duration_s:.3f} s"
        )
    x = resample(Waveform(np.asarray(clean.samples, dtype=np.float64),
                          clean.sample_rate_hz), STOI_RATE_HZ).samples
    y = resample(Waveform(np.asarray(processed.samples, dtype=np.float64),
                          processed.sample_rate_hz), STOI_RATE_HZ).samples
    x, y = _remove_silent_frames(x, y)

    env_x = _band_envelopes(x)
    env_y = _band_envelopes(y)
    n_frames = env_x.shape[0]
    if n_frames < STOI_SEGMENT_FRAMES:
        raise MetricError(
            f"stoi needs {STOI_SEGMENT_FRAMES} active frames "
            f"({MIN_STOI_SECONDS:.3f} s), got {n_frames} after silence removal"
        )

    clip_gain = 10.0 ** (-STOI_CLIP_DB / 20.0)  # 1 + relative bound
    correlations = []
    for m in range(STOI_SEGMENT_FRAMES, n_frames + 1):
        seg_x = env_x[m - STOI_SEGMENT_FRAMES : m]  # (30, bands)
        seg_y = env_y[m - STOI_SEGMENT_FRAMES : m]
        alpha = np.linalg.norm(seg_x, axis=0) / (np.linalg.norm(seg_y, axis=0) + 1e-20)
        y_scaled = seg_y * alpha
        y_clipped = np.minimum(y_scaled, seg_x * (1.0 + clip_gain))
        xc = seg_x - seg_x.mean(axis=0)
        yc = y_clipped - y_clipped.mean(axis=0)
        denom = np.linalg.norm(xc, axis=0) * np.linalg.norm(yc, axis=0) + 1e-20
        correlations.append((xc * yc).sum(axis=0) / denom)
    return float(np.mean(correlations))


def si_snr(ref: Waveform, est: Waveform) -> float:
    """Scale-invariant SNR in dB, capped at +60 when the residual vanishes."""
    if len(ref) != len(est):
        raise MetricError(f"si_snr expects equal lengths, got {len(ref)} vs {len(est)}")
    r = np.asarray(ref.samples, dtype=np.float64)
    e = np.asarray(est.samples, dtype=np.float64)
    r = r - r.mean()
    e = e - e.mean()
    ref_power = float(r @ r)
    if ref_power == 0.0:
        raise MetricError("si_snr reference signal is zero")
    target = (e @ r) / ref_power * r
    residual = e - target
    p_target = float(target @ target)
    p_residual = float(residual @ residual)
    if p_residual <= p_target * 10.0 ** (-SI_SNR_CAP_DB / 10.0):
        return SI_SNR_CAP_DB
    return min(SI_SNR_CAP_DB, 10.0 * math.log10(p_target / p_residual))


def lsd(ref: Waveform, est: Waveform, cfg: StftConfig | None = None) -> float:
    """Log-spectral distance in dB: per-frame RMS over bins, averaged."""
    if len(ref) != len(est):
        raise MetricError(f"lsd expects equal lengths, got {len(ref)} vs {len(est)}")
    cfg = cfg or StftConfig()
    mag_r = np.maximum(np.abs(stft(ref, cfg).data), 1e-8)
    mag_e = np.maximum(np.abs(stft(est, cfg).data), 1e-8)
    diff_db = 20.0 * (np.log10(mag_r) - np.log10(mag_e))
    return float(np.mean(np.sqrt(np.mean(diff_db**2, axis=1))))


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise MetricError(f"cosine similarity needs equal dims, got {a.size} vs {b.size}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise MetricError("cosine similarity undefined for zero vectors")
    return float(a @ b / (na * nb))


def embedding_mse(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise MetricError(f"embedding mse needs equal shapes, got {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


@dataclass
class MetricReport:
    """Per-pair scores plus aggregate means."""

    pairs: list = field(default_factory=list)   # dicts with id + metric values
    skipped: list = field(default_factory=list)  # (id, reason)

    def add(self, pair_id: str, scores: dict) -> None:
        self.pairs.append({"id": pair_id, **scores})

    def skip(self, pair_id: str, reason: str) -> None:
        self.skipped.append({"id": pair_id, "reason": reason})

    @property
    def aggregates(self) -> dict:
        if not self.pairs:
            return {}
        keys = [k for k in self.pairs[0] if k != "id"]
        out = {}
        for k in keys:
            vals = [p[k] for p in self.pairs if p.get(k) is not None]
            if vals:
                out[k] = float(np.mean(vals))
        return out

    def to_dict(self) -> dict:
        return {
            "pairs": self.pairs,
            "skipped": self.skipped,
            "aggregates": self.aggregates,
            "counts": {"scored": len(self.pairs), "skipped": len(self.skipped)},
        }
