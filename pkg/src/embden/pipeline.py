"""Pipeline composition: encoder -> denoiser -> vocoder, plus evaluation.

The enhancement chain validates dimension/frame-rate compatibility at
load time and names the broken link on mismatch. Evaluation scores
(clean, processed) waveform pairs with the objective metric suite and
optional speaker-embedding cosine similarity from EMB1 files.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint
from .denoiser import DenoiserModel, load_denoiser
from .dsp import INTERNAL_RATE_HZ, Waveform, resample
from .encoders import encoder_descriptor, lms_encode, read_embeddings
from .metrics import (
    MetricError,
    MetricReport,
    cosine_similarity,
    embedding_mse,
    lsd,
    si_snr,
    stoi,
)
from .vocoder import VocoderModel, load_vocoder
from .wavio import read_wav

KNOWN_METRICS = ("stoi", "sisnr", "lsd", "embmse", "speaker")
ALIGN_TOLERANCE_SAMPLES = 1600  # 0.1 s


class PipelineConfigError(ValueError):
    """Raised when the enhancement chain cannot be assembled."""


@dataclass
class PipelineConfig:
    encoder_id: str = "lms"
    denoiser_checkpoint: str | None = None
    vocoder_checkpoint: str | None = None
    metrics: tuple = ("stoi", "sisnr", "lsd")
    workers: int = 1

    @staticmethod
    def from_json(path) -> "PipelineConfig":
        raw = json.loads(Path(path).read_text())
        unknown = set(raw) - set(PipelineConfig().__dict__)
        if unknown:
            raise PipelineConfigError(f"{path}: unknown config keys {sorted(unknown)}")
        if "metrics" in raw:
            raw["metrics"] = tuple(raw["metrics"])
        return PipelineConfig(**raw)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["metrics"] = list(self.metrics)
        return d


def _load_waveform_16k(path) -> Waveform:
    samples, rate = read_wav(path)
    return resample(Waveform(samples, rate), INTERNAL_RATE_HZ)


class Enhancer:
    """Loaded encoder -> denoiser -> vocoder chain."""

    def __init__(self, denoiser: DenoiserModel, vocoder: VocoderModel,
                 encoder_id: str = "lms"):
        desc = encoder_descriptor(encoder_id)
        if desc.source != "builtin_lms":
            raise PipelineConfigError(
                f"enhance runs on the builtin lms encoder; {encoder_id!r} embeddings "
                "are produced externally and consumed from EMB1 files"
            )
        if desc.dim != denoiser.arch.input_dim:
            raise PipelineConfigError(
                f"chain broken at encoder->denoiser: encoder {encoder_id!r} emits dim "
                f"{desc.dim}, denoiser expects {denoiser.arch.input_dim}"
            )
        if denoiser.arch.input_dim != vocoder.cfg.input_dim:
            raise PipelineConfigError(
                f"chain broken at denoiser->vocoder: denoiser emits dim "
                f"{denoiser.arch.input_dim}, vocoder expects {vocoder.cfg.input_dim}"
            )
        if abs(desc.frame_rate_hz - vocoder.cfg.input_frame_rate_hz) > 1e-6:
            raise PipelineConfigError(
                f"chain broken at encoder->vocoder: encoder frame rate "
                f"{desc.frame_rate_hz} Hz, vocoder trained at "
                f"{vocoder.cfg.input_frame_rate_hz} Hz"
            )
        self.encoder_id = encoder_id
        self.denoiser = denoiser
        self.vocoder = vocoder

    @staticmethod
    def from_config(cfg: PipelineConfig) -> "Enhancer":
        if not cfg.denoiser_checkpoint or not cfg.vocoder_checkpoint:
            raise PipelineConfigError(
                "config must provide denoiser_checkpoint and vocoder_checkpoint"
            )
        denoiser = load_denoiser(load_checkpoint(cfg.denoiser_checkpoint))
        vocoder = load_vocoder(load_checkpoint(cfg.vocoder_checkpoint))
        return Enhancer(denoiser, vocoder, cfg.encoder_id)

    def enhance(self, noisy: Waveform) -> Waveform:
        """Denoise at the embedding level and resynthesize.

        Output is 16 kHz, cropped to the input length (synthesis covers
        whole frames, up to one hop longer).
        """
        w = resample(noisy, INTERNAL_RATE_HZ)
        emb = lms_encode(w)
        denoised = self.denoiser.denoise(emb)
        out = self.vocoder.synthesize(denoised)
        n = min(len(w), len(out))
        return Waveform(out.samples[:n], INTERNAL_RATE_HZ)

    def resynthesize(self, clean: Waveform) -> Waveform:
        """Vocoder round trip without denoising (baseline for comparisons)."""
        w = resample(clean, INTERNAL_RATE_HZ)
        out = self.vocoder.synthesize(lms_encode(w))
        n = min(len(w), len(out))
        return Waveform(out.samples[:n], INTERNAL_RATE_HZ)


@dataclass(frozen=True)
class EvalPair:
    pair_id: str
    clean: Path
    processed: Path
    clean_spk: Path | None = None
    processed_spk: Path | None = None


def load_pairs(path) -> list[EvalPair]:
    """Parse a JSON-lines pair manifest: {id, clean, processed[, *_spk]}."""
    path = Path(path)
    pairs = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        missing = {"clean", "processed"} - set(rec)
        if missing:
            raise PipelineConfigError(f"{path}:{lineno}: missing fields {sorted(missing)}")

        def _resolve(key):
            if key not in rec or rec[key] is None:
                return None
            p = Path(rec[key])
            return p if p.is_absolute() else path.parent / p

        pairs.append(EvalPair(
            pair_id=str(rec.get("id", f"pair{lineno}")),
            clean=_resolve("clean"),
            processed=_resolve("processed"),
            clean_spk=_resolve("clean_spk"),
            processed_spk=_resolve("processed_spk"),
        ))
    if not pairs:
        raise PipelineConfigError(f"{path}: empty pair manifest")
    return pairs


def _speaker_vector(path) -> np.ndarray:
    seq = read_embeddings(path)
    if seq.encoder_id != "speaker":
        raise MetricError(
            f"{path}: expected encoder_id 'speaker', got {seq.encoder_id!r}"
        )
    return seq.data.mean(axis=0)


def _score_pair(pair: EvalPair, metric_names: tuple) -> tuple[str, dict | None, str | None]:
    clean = _load_waveform_16k(pair.clean)
    processed = _load_waveform_16k(pair.processed)
    delta = abs(len(clean) - len(processed))
    if delta > ALIGN_TOLERANCE_SAMPLES:
        return pair.pair_id, None, (
            f"length mismatch beyond alignment tolerance: {len(clean)} vs {len(processed)}"
        )
    n = min(len(clean), len(processed))
    clean = Waveform(clean.samples[:n], INTERNAL_RATE_HZ)
    processed = Waveform(processed.samples[:n], INTERNAL_RATE_HZ)

    scores: dict = {}
    if "stoi" in metric_names:
        scores["stoi"] = stoi(clean, processed)
    if "sisnr" in metric_names:
        scores["si_snr_db"] = si_snr(clean, processed)
    if "lsd" in metric_names:
        scores["lsd_db"] = lsd(clean, processed)
    if "embmse" in metric_names:
        scores["emb_mse"] = embedding_mse(lms_encode(clean).data,
                                          lms_encode(processed).data)
    if "speaker" in metric_names:
        if pair.clean_spk is None or pair.processed_spk is None:
            return pair.pair_id, None, "speaker metric requested but *_spk paths missing"
        scores["speaker_cosine"] = cosine_similarity(
            _speaker_vector(pair.clean_spk), _speaker_vector(pair.processed_spk)
        )
    return pair.pair_id, scores, None


def evaluate_pairs(pairs: list[EvalPair], metric_names=("stoi", "sisnr", "lsd"),
                   workers: int = 1) -> MetricReport:
    """Score every pair; misaligned pairs are skipped with a warning."""
    unknown = set(metric_names) - set(KNOWN_METRICS)
    if unknown:
        raise PipelineConfigError(
            f"unknown metrics {sorted(unknown)}; choose from {KNOWN_METRICS}"
        )
    report = MetricReport()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_score_pair, pairs,
                                    [tuple(metric_names)] * len(pairs)))
    else:
        results = [_score_pair(p, tuple(metric_names)) for p in pairs]
    for pair_id, scores, reason in results:
        if scores is None:
            warnings.warn(f"skipping pair {pair_id}: {reason}", stacklevel=2)
            report.skip(pair_id, reason)
        else:
            report.add(pair_id, scores)
    return report
