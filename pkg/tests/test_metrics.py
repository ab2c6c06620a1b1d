import numpy as np
import pytest

from embden.dsp import Waveform
from embden.metrics import (
    MetricError,
    MetricReport,
    cosine_similarity,
    embedding_mse,
    lsd,
    si_snr,
    stoi,
)


def _speech(seconds=2.0, seed=0):
    """Modulated multi-harmonic signal: speech-band energy, varying envelope."""
    rng = np.random.default_rng(seed)
    n = int(16000 * seconds)
    t = np.arange(n) / 16000
    envelope = 0.55 + 0.45 * np.sin(2 * np.pi * 2.5 * t + rng.uniform(0, 6.28))
    x = sum(0.25 / k * np.sin(2 * np.pi * 190 * k * t + rng.uniform(0, 6.28))
            for k in range(1, 8))
    x = envelope * x + 0.002 * rng.standard_normal(n)
    return Waveform(x.astype(np.float64), 16000)


def _mix_at_snr(clean: Waveform, snr_db: float, seed=1) -> Waveform:
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(len(clean))
    gain = np.sqrt(np.mean(clean.samples**2) / (np.mean(noise**2) * 10 ** (snr_db / 10)))
    return Waveform(clean.samples + gain * noise, 16000)


class TestStoi:
    def test_self_similarity_is_one(self):
        x = _speech()
        assert abs(stoi(x, x) - 1.0) < 1e-6

    def test_monotone_across_snr_grid(self):
        x = _speech(seed=2)
        scores = [stoi(x, _mix_at_snr(x, snr)) for snr in (20, 10, 0, -10)]
        assert all(a > b for a, b in zip(scores, scores[1:])), scores

    def test_independent_noise_scores_low(self):
        x = _speech(seed=3)
        rng = np.random.default_rng(4)
        noise = Waveform(0.2 * rng.standard_normal(len(x)), 16000)
        assert stoi(x, noise) < 0.4

    def test_gain_invariance(self):
        x = _speech(seed=5)
        y = _mix_at_snr(x, 5.0)
        base = stoi(x, y)
        for gx in (0.1, 10.0):
            for gy in (0.1, 10.0):
                scaled = stoi(Waveform(gx * x.samples, 16000),
                              Waveform(gy * y.samples, 16000))
                assert abs(scaled - base) < 1e-6

    def test_too_short_errors_with_duration(self):
        x = Waveform(np.random.default_rng(6).standard_normal(3000), 16000)
        with pytest.raises(MetricError, match="0.384"):
            stoi(x, x)

    def test_length_mismatch_errors(self):
        x = _speech()
        with pytest.raises(MetricError, match="equal lengths"):
            stoi(x, Waveform(x.samples[:-100], 16000))


class TestSiSnr:
    def test_scale_invariance_hits_cap(self):
        x = _speech(seed=7)
        assert si_snr(x, Waveform(0.5 * x.samples, 16000)) == 60.0
        assert si_snr(x, Waveform(-x.samples, 16000)) == 60.0

    def test_equal_power_orthogonal_noise_is_zero_db(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal(16000)
        x -= x.mean()
        n = rng.standard_normal(16000)
        n -= n.mean()
        n -= (n @ x) / (x @ x) * x                     # exactly orthogonal
        n *= np.sqrt((x @ x) / (n @ n))                # exactly equal power
        val = si_snr(Waveform(x, 16000), Waveform(x + n, 16000))
        assert abs(val) < 0.1

    def test_zero_reference_errors(self):
        z = Waveform(np.zeros(1000), 16000)
        with pytest.raises(MetricError, match="zero"):
            si_snr(z, z)

    def test_positive_rescaling_exact_invariance(self):
        x = _speech(seed=9)
        y = _mix_at_snr(x, 3.0, seed=10)
        a = si_snr(x, y)
        b = si_snr(x, Waveform(3.7 * y.samples, 16000))
        assert abs(a - b) < 1e-9


class TestLsd:
    def test_identity_zero(self):
        x = _speech(seed=11)
        assert lsd(x, x) == 0.0

    def test_double_gain_constant_offset(self):
        rng = np.random.default_rng(12)
        x = Waveform(0.05 * rng.standard_normal(16000), 16000)
        y = Waveform(2.0 * x.samples, 16000)
        assert abs(lsd(x, y) - 20 * np.log10(2.0)) < 1e-3

    def test_symmetry(self):
        a = _speech(seed=13)
        b = _mix_at_snr(a, 0.0, seed=14)
        assert abs(lsd(a, b) - lsd(b, a)) < 1e-9


class TestCosine:
    def test_triple(self):
        rng = np.random.default_rng(15)
        a = rng.standard_normal(192)
        assert cosine_similarity(a, a) == pytest.approx(1.0)
        assert cosine_similarity(a, -a) == pytest.approx(-1.0)
        e1 = np.zeros(4)
        e2 = np.zeros(4)
        e1[0] = 1.0
        e2[2] = 1.0
        assert cosine_similarity(e1, e2) == 0.0

    def test_zero_vector_errors(self):
        with pytest.raises(MetricError, match="zero"):
            cosine_similarity(np.zeros(3), np.ones(3))


class TestReport:
    def test_aggregates_are_row_means(self):
        r = MetricReport()
        r.add("a", {"stoi": 0.8, "si_snr_db": 10.0})
        r.add("b", {"stoi": 0.6, "si_snr_db": 20.0})
        r.skip("c", "length mismatch")
        d = r.to_dict()
        assert d["aggregates"]["stoi"] == pytest.approx(0.7)
        assert d["aggregates"]["si_snr_db"] == pytest.approx(15.0)
        assert d["counts"] == {"scored": 2, "skipped": 1}

    def test_embedding_mse(self):
        a = np.ones((3, 4))
        b = np.zeros((3, 4))
        assert embedding_mse(a, b) == 1.0
