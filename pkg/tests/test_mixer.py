import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from embden.dsp import Waveform, mean_power
from embden.mixer import (
    DEFAULT_SNR_RANGE_DB,
    MixerError,
    MixingLoader,
    gain_for_snr,
    load_manifest,
    mix,
    sample_rng,
    sample_snr,
)
from embden.wavio import write_wav


def _wave(x):
    return Waveform(np.asarray(x, dtype=np.float32), 16000)


def _realized_snr_db(sample):
    return 10 * np.log10(
        mean_power(sample.clean) / mean_power(sample.gain * sample.noise)
    )


class TestGainForSnr:
    def test_equal_power_zero_db(self):
        rng = np.random.default_rng(0)
        c = rng.standard_normal(1000)
        n = rng.standard_normal(1000)
        n *= np.sqrt(mean_power(c) / mean_power(n))
        assert abs(gain_for_snr(c, n, 0.0) - 1.0) < 1e-9

    def test_equal_power_20db_gain_tenth(self):
        rng = np.random.default_rng(1)
        c = rng.standard_normal(1000)
        n = rng.standard_normal(1000)
        n *= np.sqrt(mean_power(c) / mean_power(n))
        g = gain_for_snr(c, n, 20.0)
        assert abs(g - 0.1) < 1e-9
        realized = 10 * np.log10(mean_power(c) / mean_power(g * n))
        assert abs(realized - 20.0) < 1e-9

    def test_equal_power_minus10db(self):
        rng = np.random.default_rng(2)
        c = rng.standard_normal(1000)
        n = rng.standard_normal(1000)
        n *= np.sqrt(mean_power(c) / mean_power(n))
        g = gain_for_snr(c, n, -10.0)
        assert abs(g - 10 ** 0.5) < 1e-9
        realized = 10 * np.log10(mean_power(c) / mean_power(g * n))
        assert abs(realized + 10.0) < 1e-9

    def test_zero_noise_errors(self):
        with pytest.raises(MixerError, match="zero power"):
            gain_for_snr(np.ones(10), np.zeros(10), 0.0)

    def test_zero_clean_warns_gain_zero(self):
        with pytest.warns(UserWarning, match="gain 0"):
            assert gain_for_snr(np.zeros(10), np.ones(10), 0.0) == 0.0


class TestMix:
    def test_high_snr_override_preserves_clean(self):
        rng = np.random.default_rng(3)
        clean = _wave(0.3 * np.sin(2 * np.pi * 220 * np.arange(16000) / 16000))
        noise = _wave(rng.standard_normal(16000) * 0.3)
        s = mix(clean, noise, 60.0, np.random.default_rng(0))
        ref = s.clean - s.clean.mean()
        est = s.mixture - s.mixture.mean()
        target = (est @ ref) / (ref @ ref) * ref
        resid = est - target
        si_snr = 10 * np.log10((target @ target) / (resid @ resid))
        assert si_snr > 55

    def test_determinism(self):
        rng = np.random.default_rng(4)
        clean = _wave(rng.standard_normal(16000) * 0.1)
        noise = _wave(rng.standard_normal(20000) * 0.1)
        a = mix(clean, noise, 5.0, np.random.default_rng(42))
        b = mix(clean, noise, 5.0, np.random.default_rng(42))
        np.testing.assert_array_equal(a.mixture, b.mixture)
        np.testing.assert_array_equal(a.clean, b.clean)
        assert a.gain == b.gain

    def test_realized_snr_1000_mixes(self):
        rng = np.random.default_rng(5)
        clean = _wave(rng.standard_normal(16000) * 0.1)
        noise = _wave(rng.standard_normal(48000) * 0.2)
        snr_rng = np.random.default_rng(6)
        for i in range(1000):
            snr = sample_snr(snr_rng)
            s = mix(clean, noise, snr, sample_rng(7, 0, i))
            assert DEFAULT_SNR_RANGE_DB[0] <= snr <= DEFAULT_SNR_RANGE_DB[1]
            assert abs(_realized_snr_db(s) - snr) < 0.01

    def test_pairing_integrity_bitwise(self):
        rng = np.random.default_rng(8)
        clean = _wave(rng.standard_normal(16000))  # loud, forces normalization
        noise = _wave(rng.standard_normal(16000))
        s = mix(clean, noise, 0.0, np.random.default_rng(1))
        np.testing.assert_array_equal(
            s.mixture, s.clean + np.float32(s.gain) * s.noise
        )

    def test_no_clipping_after_normalization(self):
        rng = np.random.default_rng(9)
        clean = _wave(rng.standard_normal(16000) * 2.0)
        noise = _wave(rng.standard_normal(16000) * 2.0)
        s = mix(clean, noise, -10.0, np.random.default_rng(2))
        assert np.abs(s.mixture).max() <= 0.99 * (1 + 1e-6)

    @settings(max_examples=25, deadline=None)
    @given(snr=st.floats(min_value=-10, max_value=25),
           seed=st.integers(min_value=0, max_value=2**31))
    def test_realized_snr_property(self, snr, seed):
        rng = np.random.default_rng(seed)
        clean = _wave(rng.standard_normal(4000) * 0.2)
        noise = _wave(rng.standard_normal(4000) * 0.2)
        s = mix(clean, noise, snr, np.random.default_rng(seed))
        assert abs(_realized_snr_db(s) - snr) < 0.01


class TestSampleSnr:
    def test_bounds_and_mean(self):
        rng = np.random.default_rng(10)
        draws = np.array([sample_snr(rng) for _ in range(10_000)])
        assert draws.min() >= -10.0
        assert draws.max() <= 25.0
        assert abs(draws.mean() - 7.5) < 0.5

    def test_reproducible_sequence(self):
        a = [sample_snr(np.random.default_rng(11)) for _ in range(5)]
        b = [sample_snr(np.random.default_rng(11)) for _ in range(5)]
        assert a == b


def _write_corpus(tmp_path, n_clean=3, n_noise=2):
    rng = np.random.default_rng(12)
    lines = []
    for i in range(n_clean):
        p = tmp_path / f"clean{i}.wav"
        t = np.arange(12000) / 16000
        write_wav(p, 0.4 * np.sin(2 * np.pi * (200 + 50 * i) * t), 16000)
        lines.append({"path": p.name, "role": "clean"})
    for i in range(n_noise):
        p = tmp_path / f"noise{i}.wav"
        write_wav(p, (rng.standard_normal(9000) * 0.2).clip(-1, 1), 16000)
        lines.append({"path": p.name, "role": "noise"})
    mpath = tmp_path / "manifest.jsonl"
    mpath.write_text("\n".join(json.dumps(rec) for rec in lines))
    return mpath


class TestManifestAndLoader:
    def test_load_and_roles(self, tmp_path):
        m = load_manifest(_write_corpus(tmp_path))
        assert len(m.paths("clean")) == 3
        assert len(m.paths("noise")) == 2

    def test_duplicate_paths_rejected(self, tmp_path):
        p = tmp_path / "m.jsonl"
        rec = json.dumps({"path": "a.wav", "role": "clean"})
        p.write_text(rec + "\n" + rec)
        with pytest.raises(MixerError, match="duplicate"):
            load_manifest(p)

    def test_bad_role_rejected(self, tmp_path):
        p = tmp_path / "m.jsonl"
        p.write_text(json.dumps({"path": "a.wav", "role": "music"}))
        with pytest.raises(MixerError, match="role"):
            load_manifest(p)

    def test_empty_rejected(self, tmp_path):
        p = tmp_path / "m.jsonl"
        p.write_text("")
        with pytest.raises(MixerError, match="empty"):
            load_manifest(p)

    def test_loader_determinism_across_workers(self, tmp_path):
        m = load_manifest(_write_corpus(tmp_path))
        loader1 = MixingLoader(m, seed=5)
        loader2 = MixingLoader(m, seed=5)
        for idx in (0, 3, 17):
            a = loader1.mixture(idx, worker_id=2)
            b = loader2.mixture(idx, worker_id=2)
            np.testing.assert_array_equal(a.mixture, b.mixture)
        # different indexes differ
        assert not np.array_equal(loader1.mixture(0).mixture, loader1.mixture(1).mixture)

    def test_loader_crops_one_second(self, tmp_path):
        loader = MixingLoader(load_manifest(_write_corpus(tmp_path)), seed=6)
        s = loader.mixture(0)
        assert s.mixture.shape == (16000,)
        assert loader.clean_crop(4).samples.shape == (16000,)

    def test_clean_only_manifest_cannot_mix(self, tmp_path):
        mpath = _write_corpus(tmp_path, n_noise=0)
        loader = MixingLoader(load_manifest(mpath), seed=7)
        with pytest.raises(MixerError, match="noise"):
            loader.mixture(0)
