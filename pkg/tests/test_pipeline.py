import json

import numpy as np
import pytest

from embden.denoiser import build_denoiser, canonical_arch
from embden.dsp import Waveform
from embden.pipeline import (
    Enhancer,
    PipelineConfig,
    PipelineConfigError,
    evaluate_pairs,
    load_pairs,
)
from embden.encoders import EmbeddingSequence, write_embeddings
from embden.vocoder import VocoderConfig, build_vocoder
from embden.wavio import write_wav


def _speech(seconds=1.0, f0=200.0, seed=0):
    rng = np.random.default_rng(seed)
    n = int(16000 * seconds)
    t = np.arange(n) / 16000
    env = 0.6 + 0.4 * np.sin(2 * np.pi * 3.0 * t)
    x = env * sum(0.22 / k * np.sin(2 * np.pi * f0 * k * t) for k in range(1, 6))
    x += 0.003 * rng.standard_normal(n)
    return Waveform(x.astype(np.float32), 16000)


def _small_enhancer(seed=0):
    denoiser = build_denoiser(canonical_arch("mlp2", embed_dim=100), seed=seed)
    vocoder = build_vocoder(VocoderConfig(hidden_dim=32, n_blocks=1,
                                          intermediate_dim=64), seed=seed)
    return Enhancer(denoiser, vocoder)


class TestEnhancer:
    def test_chain_dim_mismatch_named(self):
        denoiser = build_denoiser(canonical_arch("mlp2"), seed=1)  # 768-dim
        vocoder = build_vocoder(VocoderConfig(), seed=1)           # 100-dim
        with pytest.raises(PipelineConfigError, match="encoder->denoiser"):
            Enhancer(denoiser, vocoder)

    def test_chain_vocoder_mismatch_named(self):
        denoiser = build_denoiser(canonical_arch("mlp2", embed_dim=100), seed=2)
        vocoder = build_vocoder(VocoderConfig(input_dim=768, input_frame_rate_hz=62.5,
                                              hidden_dim=16, n_blocks=1,
                                              intermediate_dim=32), seed=2)
        with pytest.raises(PipelineConfigError, match="denoiser->vocoder"):
            Enhancer(denoiser, vocoder)

    def test_enhance_output_rate_and_length(self):
        enh = _small_enhancer()
        noisy = _speech(seed=3)
        out = enh.enhance(noisy)
        assert out.sample_rate_hz == 16000
        assert abs(len(out) - len(noisy)) <= 256  # within one hop
        assert np.isfinite(out.samples).all()

    def test_enhance_resamples_input(self):
        enh = _small_enhancer()
        rng = np.random.default_rng(4)
        noisy48 = Waveform(0.1 * rng.standard_normal(48000).astype(np.float32), 48000)
        out = enh.enhance(noisy48)
        assert out.sample_rate_hz == 16000
        assert abs(len(out) - 16000) <= 256

    def test_enhancement_reproducible(self):
        enh = _small_enhancer(seed=5)
        noisy = _speech(seed=6)
        np.testing.assert_array_equal(enh.enhance(noisy).samples,
                                      enh.enhance(noisy).samples)

    def test_from_config_requires_checkpoints(self):
        with pytest.raises(PipelineConfigError, match="checkpoint"):
            Enhancer.from_config(PipelineConfig())


def _write_pairs(tmp_path, records):
    lines = []
    for rec in records:
        lines.append(json.dumps(rec))
    p = tmp_path / "pairs.jsonl"
    p.write_text("\n".join(lines))
    return p


class TestEvaluate:
    def test_identical_pairs_hit_ceiling(self, tmp_path):
        w = _speech(seconds=1.2, seed=7)
        write_wav(tmp_path / "c.wav", w.samples, 16000)
        pairs_path = _write_pairs(tmp_path, [
            {"id": "p0", "clean": "c.wav", "processed": "c.wav"}
        ])
        report = evaluate_pairs(load_pairs(pairs_path), ("stoi", "sisnr", "lsd"))
        row = report.pairs[0]
        assert abs(row["stoi"] - 1.0) < 1e-6
        assert row["si_snr_db"] == 60.0
        assert row["lsd_db"] == 0.0

    def test_aggregates_match_rows(self, tmp_path):
        a, b = _speech(seed=8), _speech(f0=250, seed=9)
        write_wav(tmp_path / "a.wav", a.samples, 16000)
        write_wav(tmp_path / "b.wav", b.samples, 16000)
        pairs_path = _write_pairs(tmp_path, [
            {"id": "aa", "clean": "a.wav", "processed": "a.wav"},
            {"id": "ab", "clean": "a.wav", "processed": "b.wav"},
        ])
        report = evaluate_pairs(load_pairs(pairs_path), ("sisnr", "lsd"))
        agg = report.aggregates
        rows = report.pairs
        assert agg["si_snr_db"] == pytest.approx(
            np.mean([r["si_snr_db"] for r in rows]), abs=1e-9)
        assert agg["lsd_db"] == pytest.approx(
            np.mean([r["lsd_db"] for r in rows]), abs=1e-9)

    def test_gross_length_mismatch_skipped_with_warning(self, tmp_path):
        a = _speech(seconds=1.0, seed=10)
        b = _speech(seconds=2.0, seed=11)
        write_wav(tmp_path / "a.wav", a.samples, 16000)
        write_wav(tmp_path / "b.wav", b.samples, 16000)
        pairs_path = _write_pairs(tmp_path, [
            {"id": "bad", "clean": "a.wav", "processed": "b.wav"},
            {"id": "good", "clean": "a.wav", "processed": "a.wav"},
        ])
        with pytest.warns(UserWarning, match="skipping pair bad"):
            report = evaluate_pairs(load_pairs(pairs_path), ("sisnr",))
        d = report.to_dict()
        assert d["counts"] == {"scored": 1, "skipped": 1}
        assert d["skipped"][0]["id"] == "bad"

    def test_empty_pair_manifest_errors(self, tmp_path):
        p = tmp_path / "pairs.jsonl"
        p.write_text("")
        with pytest.raises(PipelineConfigError, match="empty"):
            load_pairs(p)

    def test_unknown_metric_rejected(self, tmp_path):
        w = _speech(seed=12)
        write_wav(tmp_path / "c.wav", w.samples, 16000)
        pairs_path = _write_pairs(tmp_path, [
            {"id": "p", "clean": "c.wav", "processed": "c.wav"}
        ])
        with pytest.raises(PipelineConfigError, match="unknown metrics"):
            evaluate_pairs(load_pairs(pairs_path), ("pesq",))

    def test_speaker_cosine_from_emb1(self, tmp_path):
        w = _speech(seconds=1.0, seed=13)
        write_wav(tmp_path / "c.wav", w.samples, 16000)
        rng = np.random.default_rng(14)
        vec = rng.standard_normal((1, 192)).astype(np.float32)
        write_embeddings(EmbeddingSequence(vec, 1.0, "speaker"), tmp_path / "c.emb")
        write_embeddings(EmbeddingSequence(-vec, 1.0, "speaker"), tmp_path / "d.emb")
        pairs_path = _write_pairs(tmp_path, [
            {"id": "p", "clean": "c.wav", "processed": "c.wav",
             "clean_spk": "c.emb", "processed_spk": "d.emb"}
        ])
        report = evaluate_pairs(load_pairs(pairs_path), ("speaker",))
        assert report.pairs[0]["speaker_cosine"] == pytest.approx(-1.0)

    def test_workers_match_serial(self, tmp_path):
        a, b = _speech(seed=15), _speech(f0=300, seed=16)
        write_wav(tmp_path / "a.wav", a.samples, 16000)
        write_wav(tmp_path / "b.wav", b.samples, 16000)
        pairs_path = _write_pairs(tmp_path, [
            {"id": f"p{i}", "clean": "a.wav", "processed": ("a.wav" if i % 2 else "b.wav")}
            for i in range(4)
        ])
        pairs = load_pairs(pairs_path)
        serial = evaluate_pairs(pairs, ("sisnr", "lsd")).to_dict()
        parallel = evaluate_pairs(pairs, ("sisnr", "lsd"), workers=2).to_dict()
        assert serial == parallel


class TestConfig:
    def test_round_trip(self, tmp_path):
        cfg = PipelineConfig(denoiser_checkpoint="d.ckpt", vocoder_checkpoint="v.ckpt",
                             metrics=("stoi",), workers=2)
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(cfg.to_dict()))
        back = PipelineConfig.from_json(p)
        assert back == cfg

    def test_unknown_keys_rejected(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"denoiser_checkpoint": "d", "gpu": True}))
        with pytest.raises(PipelineConfigError, match="unknown config keys"):
            PipelineConfig.from_json(p)
