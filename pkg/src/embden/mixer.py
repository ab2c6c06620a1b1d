"""Manifest-driven data pipeline with on-the-fly SNR-controlled mixing.

Noise is tiled and cropped to the clean length at a random offset, scaled
so the realized clean-to-noise power ratio hits the requested SNR exactly
over the crop, and the pair is jointly peak-normalized. Every sample is
reproducible from (seed, worker_id, sample_index).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dsp import INTERNAL_RATE_HZ, Waveform, mean_power, resample
from .wavio import read_wav

DEFAULT_SNR_RANGE_DB = (-10.0, 25.0)
CROP_SAMPLES = 16_000  # 1 s at the internal rate
PEAK_TARGET = 0.99

ROLES = ("clean", "noise")
SPLITS = ("train", "eval")


class MixerError(ValueError):
    """Raised for invalid manifests or degenerate mixing inputs."""


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    role: str
    split: str = "train"


@dataclass
class Manifest:
    entries: list[ManifestEntry]

    def paths(self, role: str, split: str | None = None) -> list[Path]:
        return [e.path for e in self.entries
                if e.role == role and (split is None or e.split == split)]

    def require_clean(self) -> None:
        if not any(e.role == "clean" for e in self.entries):
            raise MixerError("manifest contains no clean entries; training needs clean speech")


def load_manifest(path) -> Manifest:
    """Parse a JSON-lines manifest of {path, role, split} records."""
    path = Path(path)
    entries = []
    seen = set()
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise MixerError(f"{path}:{lineno}: invalid JSON ({e})") from None
        missing = {"path", "role"} - set(rec)
        if missing:
            raise MixerError(f"{path}:{lineno}: missing fields {sorted(missing)}")
        if rec["role"] not in ROLES:
            raise MixerError(f"{path}:{lineno}: role must be one of {ROLES}, got {rec['role']!r}")
        split = rec.get("split", "train")
        if split not in SPLITS:
            raise MixerError(f"{path}:{lineno}: split must be one of {SPLITS}, got {split!r}")
        entry_path = Path(rec["path"])
        if not entry_path.is_absolute():
            entry_path = path.parent / entry_path
        if entry_path in seen:
            raise MixerError(f"{path}:{lineno}: duplicate path {entry_path}")
        seen.add(entry_path)
        entries.append(ManifestEntry(entry_path, rec["role"], split))
    if not entries:
        raise MixerError(f"{path}: empty manifest")
    return Manifest(entries)


@dataclass(frozen=True)
class MixtureSample:
    """One simulated noisy example; mixture == clean + gain * noise bit-wise."""

    clean: np.ndarray
    noise: np.ndarray
    snr_db: float
    gain: float
    mixture: np.ndarray


def gain_for_snr(clean: np.ndarray, noise: np.ndarray, snr_db: float) -> float:
    """Noise gain realizing snr_db over these exact crops."""
    p_clean = mean_power(clean)
    p_noise = mean_power(noise)
    if p_noise == 0.0:
        raise MixerError("noise crop has zero power; cannot realize a finite SNR")
    if p_clean == 0.0:
        warnings.warn("clean crop has zero power; using gain 0", stacklevel=2)
        return 0.0
    return float(np.sqrt(p_clean / (p_noise * 10.0 ** (snr_db / 10.0))))


def sample_snr(rng: np.random.Generator, snr_range_db=DEFAULT_SNR_RANGE_DB) -> float:
    low, high = snr_range_db
    if not low < high:
        raise MixerError(f"SNR range must satisfy low < high, got {snr_range_db}")
    return float(rng.uniform(low, high))


def _tile_crop(x: np.ndarray, length: int, offset: int) -> np.ndarray:
    """Crop `length` samples starting at `offset`, tiling x as needed."""
    if x.size == 0:
        raise MixerError("cannot crop an empty signal")
    idx = (offset + np.arange(length)) % x.size
    return x[idx]


def mix(clean: Waveform, noise: Waveform, snr_db: float,
        rng: np.random.Generator) -> MixtureSample:
    """Pair a clean signal with gain-scaled noise at the requested SNR."""
    c = np.asarray(clean.samples, dtype=np.float32)
    offset = int(rng.integers(0, len(noise.samples)))
    n = _tile_crop(np.asarray(noise.samples, dtype=np.float32), c.size, offset)

    gain = gain_for_snr(c, n, snr_db)
    g32 = np.float32(gain)
    peak = float(np.abs(c + g32 * n).max())
    if peak > PEAK_TARGET:
        scale = np.float32(PEAK_TARGET / peak)
        c = c * scale
        n = n * scale
    mixture = c + g32 * n
    return MixtureSample(clean=c, noise=n, snr_db=float(snr_db),
                         gain=float(g32), mixture=mixture)


def sample_rng(seed: int, worker_id: int, sample_index: int) -> np.random.Generator:
    """Independent per-sample stream so parallel workers mix identically."""
    return np.random.default_rng([seed, worker_id, sample_index])


class MixingLoader:
    """Serves (mixture, clean) crops from a manifest, deterministically.

    Clips are loaded once, resampled to 16 kHz, and cropped to 1 s windows
    at per-sample random offsets; short files are tiled.
    """

    def __init__(self, manifest: Manifest, seed: int,
                 snr_range_db=DEFAULT_SNR_RANGE_DB, split="train",
                 crop_samples=CROP_SAMPLES):
        manifest.require_clean()
        self.seed = seed
        self.snr_range_db = snr_range_db
        self.crop_samples = crop_samples
        self.clean_clips = [self._load(p) for p in manifest.paths("clean", split)]
        self.noise_clips = [self._load(p) for p in manifest.paths("noise", split)]
        if not self.clean_clips:
            raise MixerError(f"no clean entries in split {split!r}")

    @staticmethod
    def _load(path: Path) -> Waveform:
        samples, rate = read_wav(path)
        return resample(Waveform(samples, rate), INTERNAL_RATE_HZ)

    def _crop(self, w: Waveform, rng: np.random.Generator) -> Waveform:
        offset = int(rng.integers(0, len(w)))
        return Waveform(_tile_crop(w.samples, self.crop_samples, offset),
                        INTERNAL_RATE_HZ)

    def clean_crop(self, sample_index: int, worker_id: int = 0) -> Waveform:
        rng = sample_rng(self.seed, worker_id, sample_index)
        clip = self.clean_clips[int(rng.integers(0, len(self.clean_clips)))]
        return self._crop(clip, rng)

    def mixture(self, sample_index: int, worker_id: int = 0) -> MixtureSample:
        if not self.noise_clips:
            raise MixerError("manifest has no noise entries; cannot mix")
        rng = sample_rng(self.seed, worker_id, sample_index)
        clean = self._crop(self.clean_clips[int(rng.integers(0, len(self.clean_clips)))], rng)
        noise = self.noise_clips[int(rng.integers(0, len(self.noise_clips)))]
        snr = sample_snr(rng, self.snr_range_db)
        return mix(clean, noise, snr, rng)
