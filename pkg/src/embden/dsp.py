"""Deterministic signal-processing kernels.

Windows, STFT/ISTFT with squared-window overlap-add, mel filterbank,
log-mel spectrogram, band-limited resampling, and power helpers. All
transforms run in double precision internally; waveforms entering the
pipeline are stored single precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import resample_poly

INTERNAL_RATE_HZ = 16_000

# Overlap-add of the squared window must stay above this fraction of its
# peak, otherwise reconstruction divides by (near-)zero.
_NOLA_REL_FLOOR = 1e-8


class DspError(ValueError):
    """Raised for invalid signals or transform configurations."""


@dataclass(frozen=True)
class Waveform:
    """Mono sample sequence with its sample rate."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 1:
            raise DspError(f"waveform must be 1-D, got shape {samples.shape}")
        if not np.issubdtype(samples.dtype, np.floating):
            samples = samples.astype(np.float32)
        if self.sample_rate_hz <= 0:
            raise DspError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if samples.size and not np.isfinite(samples).all():
            raise DspError("waveform contains non-finite samples")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@lru_cache(maxsize=None)
def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window of length n (read-only float64)."""
    if n <= 0:
        raise DspError(f"window length must be positive, got {n}")
    w = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)
    w.flags.writeable = False
    return w


def _window_square_sum(n_fft: int, hop: int, n_frames: int) -> np.ndarray:
    """Overlap-added squared window over n_frames frames."""
    w2 = hann_window(n_fft) ** 2
    out = np.zeros((n_frames - 1) * hop + n_fft)
    for t in range(n_frames):
        out[t * hop : t * hop + n_fft] += w2
    return out


@dataclass(frozen=True)
class StftConfig:
    """Analysis/synthesis parameters. Only Hann analysis is supported."""

    n_fft: int = 1024
    hop: int = 256
    window: str = "hann"
    center: bool = True

    def __post_init__(self):
        if self.n_fft <= 0 or self.hop <= 0:
            raise DspError(f"n_fft and hop must be positive, got ({self.n_fft}, {self.hop})")
        if self.hop > self.n_fft:
            raise DspError(f"hop {self.hop} exceeds n_fft {self.n_fft}")
        if self.window != "hann":
            raise DspError(f"unsupported window {self.window!r}")
        # NOLA: squared-window overlap-add must not vanish anywhere in the
        # steady-state interior, or ISTFT normalization breaks down.
        interior = _window_square_sum(self.n_fft, self.hop, 8)[self.n_fft : -self.n_fft]
        if interior.size and interior.min() < _NOLA_REL_FLOOR * interior.max():
            raise DspError(
                f"(n_fft={self.n_fft}, hop={self.hop}) violates the overlap-add "
                "condition for a hann window; use hop <= n_fft/2"
            )

    @property
    def bins(self) -> int:
        return self.n_fft // 2 + 1

    @property
    def frame_rate_hz(self) -> float:
        return INTERNAL_RATE_HZ / self.hop


@dataclass(frozen=True)
class ComplexSpectrogram:
    """STFT coefficients: (frames, bins) complex matrix plus its config."""

    data: np.ndarray
    config: StftConfig

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise DspError(f"spectrogram must be 2-D, got shape {data.shape}")
        if data.shape[1] != self.config.bins:
            raise DspError(
                f"bin count {data.shape[1]} inconsistent with n_fft {self.config.n_fft} "
                f"(expected {self.config.bins})"
            )
        if data.size and not np.isfinite(data).all():
            raise DspError("spectrogram contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def bins(self) -> int:
        return self.data.shape[1]


def frame_count(n_samples: int, cfg: StftConfig) -> int:
    """Number of STFT frames produced for an n_samples input."""
    padded = n_samples + (cfg.n_fft if cfg.center else 0)
    if padded < cfg.n_fft:
        return 0
    return 1 + (padded - cfg.n_fft) // cfg.hop


def stft(w: Waveform, cfg: StftConfig) -> ComplexSpectrogram:
    """Short-time Fourier transform with Hann analysis window."""
    x = np.asarray(w.samples, dtype=np.float64)
    if x.size == 0:
        raise DspError("cannot transform an empty waveform")
    if cfg.center:
        pad = cfg.n_fft // 2
        if x.size < pad + 1:
            raise DspError(
                f"waveform of {x.size} samples too short for centered analysis "
                f"with n_fft {cfg.n_fft} (needs > {pad})"
            )
        x = np.pad(x, pad, mode="reflect")
    if x.size < cfg.n_fft:
        raise DspError(
            f"waveform of {x.size} samples shorter than one frame (n_fft {cfg.n_fft})"
        )
    frames = sliding_window_view(x, cfg.n_fft)[:: cfg.hop]
    spec = np.fft.rfft(frames * hann_window(cfg.n_fft), axis=1)
    return ComplexSpectrogram(spec, cfg)


def istft(s: ComplexSpectrogram, length: int | None = None) -> Waveform:
    """Inverse STFT by squared-window-normalized overlap-add.

    Returns double-precision samples at the internal 16 kHz rate;
    istft(stft(w), len(w)) reproduces w up to floating-point error.
    """
    cfg = s.config
    frames = np.fft.irfft(s.data, n=cfg.n_fft, axis=1) * hann_window(cfg.n_fft)
    total = (s.frames - 1) * cfg.hop + cfg.n_fft
    out = np.zeros(total)
    for t in range(s.frames):
        out[t * cfg.hop : t * cfg.hop + cfg.n_fft] += frames[t]
    wsq = _window_square_sum(cfg.n_fft, cfg.hop, s.frames)
    valid = wsq > _NOLA_REL_FLOOR * wsq.max()
    out[valid] /= wsq[valid]

    if cfg.center:
        out = out[cfg.n_fft // 2 :]
    synthesizable = out.size
    if length is None:
        length = synthesizable
    if length > synthesizable:
        raise DspError(
            f"requested length {length} exceeds synthesizable length {synthesizable}"
        )
    return Waveform(out[:length], INTERNAL_RATE_HZ)


@dataclass(frozen=True)
class MelConfig:
    """Mel filterbank parameters (HTK mel scale, triangular filters)."""

    n_mels: int = 100
    f_min_hz: float = 0.0
    f_max_hz: float = 8000.0
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.n_mels <= 0:
            raise DspError(f"n_mels must be positive, got {self.n_mels}")
        if not 0.0 <= self.f_min_hz < self.f_max_hz:
            raise DspError(
                f"need 0 <= f_min < f_max, got ({self.f_min_hz}, {self.f_max_hz})"
            )
        if self.log_floor <= 0:
            raise DspError(f"log_floor must be positive, got {self.log_floor}")


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=8)
def _mel_filterbank_cached(sr: int, n_fft: int, n_mels: int,
                           f_min: float, f_max: float) -> np.ndarray:
    if f_max > sr / 2:
        raise DspError(f"f_max {f_max} exceeds Nyquist {sr / 2}")
    bin_freqs = np.arange(n_fft // 2 + 1) * (sr / n_fft)
    edges = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    fb = np.zeros((n_mels, bin_freqs.size))
    for i in range(n_mels):
        lo, center, hi = edges[i], edges[i + 1], edges[i + 2]
        rising = (bin_freqs - lo) / (center - lo)
        falling = (hi - bin_freqs) / (hi - center)
        fb[i] = np.maximum(0.0, np.minimum(rising, falling))

    row_sums = fb.sum(axis=1)
    if (row_sums <= 0).any():
        empty = int(np.argmin(row_sums))
        raise DspError(
            f"mel filter {empty} covers no FFT bin; increase n_fft or reduce n_mels"
        )
    interior = (bin_freqs > f_min) & (bin_freqs < f_max)
    if (fb[:, interior].sum(axis=0) <= 0).any():
        raise DspError("mel filterbank leaves FFT bins inside (f_min, f_max) uncovered")
    fb.flags.writeable = False
    return fb


def mel_filterbank(sr: int, n_fft: int, cfg: MelConfig) -> np.ndarray:
    """Triangular mel filterbank, shape (n_mels, n_fft//2 + 1)."""
    return _mel_filterbank_cached(sr, n_fft, cfg.n_mels, cfg.f_min_hz, cfg.f_max_hz)


def log_mel(w: Waveform, stft_cfg: StftConfig, mel_cfg: MelConfig) -> np.ndarray:
    """Floored log of the mel-filtered power spectrogram, (frames, n_mels)."""
    spec = stft(w, stft_cfg)
    power = np.abs(spec.data) ** 2
    fb = mel_filterbank(w.sample_rate_hz, stft_cfg.n_fft, mel_cfg)
    return np.log(np.maximum(power @ fb.T, mel_cfg.log_floor))


_KAISER_BETA = 14.769656459379492  # ~140 dB stopband
_TAPS_PER_PHASE = 64


def _resample_filter(up: int, down: int) -> np.ndarray:
    max_rate = max(up, down)
    half = (_TAPS_PER_PHASE // 2) * max_rate
    n = np.arange(2 * half + 1) - half
    # cutoff shaded 5% below the band edge so the transition region falls
    # entirely inside the passband side and images stay fully attenuated
    fc = 0.95 / (2.0 * max_rate)
    return 2.0 * fc * np.sinc(2.0 * fc * n) * np.kaiser(2 * half + 1, _KAISER_BETA)


def resample(w: Waveform, target_hz: int) -> Waveform:
    """Band-limited polyphase resampling to target_hz."""
    if target_hz <= 0:
        raise DspError(f"target rate must be positive, got {target_hz}")
    if target_hz == w.sample_rate_hz:
        return w
    g = math.gcd(target_hz, w.sample_rate_hz)
    up, down = target_hz // g, w.sample_rate_hz // g
    x = np.asarray(w.samples, dtype=np.float64)
    n_out = round(x.size * target_hz / w.sample_rate_hz)
    y = resample_poly(x, up, down, window=_resample_filter(up, down))
    if y.size < n_out:
        y = np.pad(y, (0, n_out - y.size))
    return Waveform(y[:n_out].astype(w.samples.dtype), target_hz)


def mean_power(x: np.ndarray) -> float:
    """Mean squared amplitude in double precision."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return 0.0
    return float(np.mean(x * x))


def rms(x: np.ndarray) -> float:
    return math.sqrt(mean_power(x))
