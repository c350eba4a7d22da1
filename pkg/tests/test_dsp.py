import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from soundvista.dsp import (
    LOUDNESS_FLOOR_DB,
    MetricsReport,
    Spectrogram,
    StftConfig,
    chunk_signal,
    compute_metrics,
    estimate_rt60,
    hann_window,
    istft,
    loudness_map,
    stft,
    stitch_chunks,
)
from soundvista.scenes import Pose
from soundvista.sim import BinauralAudio, ImpulseResponse, WalkableGrid


def _binaural(left, right, sr=16000):
    return BinauralAudio(left=left, right=right, pose=Pose(np.zeros(3)), sample_rate=sr)


class TestStft:
    def test_paper_chunk_shape(self):
        x = np.zeros(32641)
        s = stft(x)
        assert s.data.shape == (1, 256, 256)

    def test_zero_in_zero_out(self):
        s = stft(np.zeros(4000))
        assert np.all(s.data == 0)

    def test_sinusoid_energy_concentrated(self):
        cfg = StftConfig()
        sr = 16000
        f = 16 * sr / cfg.fft_size  # center of bin 16
        t = np.arange(32641) / sr
        s = stft(np.sin(2 * np.pi * f * t), cfg)
        power = np.abs(s.data[0]) ** 2
        ratio = power[15:18].sum() / power.sum()
        assert ratio >= 0.95

    def test_rejects_nonfinite(self):
        x = np.zeros(1000)
        x[5] = np.nan
        with pytest.raises(ValueError):
            stft(x)

    def test_energy_scales_quadratically(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(5000)
        e1 = np.sum(np.abs(stft(x).data) ** 2)
        e3 = np.sum(np.abs(stft(3 * x).data) ** 2)
        assert e3 == pytest.approx(9 * e1, rel=1e-10)


class TestIstft:
    def test_roundtrip_max_error(self):
        rng = np.random.default_rng(42)
        x = rng.standard_normal((2, 32641))
        y = istft(stft(x), 32641)
        rel = np.max(np.abs(y - x)) / np.max(np.abs(x))
        assert rel < 1e-6

    def test_zero_spec_zero_wave(self):
        cfg = StftConfig()
        spec = Spectrogram(np.zeros((1, cfg.bins, 40), complex), cfg)
        assert np.all(istft(spec, 4000) == 0)

    def test_linearity(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(9000)
        s = stft(x)
        y1 = istft(s, 9000)
        y2 = istft(Spectrogram(2 * s.data, s.config), 9000)
        assert np.allclose(y2, 2 * y1)

    def test_degenerate_hop_raises(self):
        with pytest.raises(ValueError):
            StftConfig(fft_size=510, win_length=510, hop=511)


class TestChunking:
    def test_single_chunk_exact(self):
        x = np.zeros((1, 32641))
        chunks, plan = chunk_signal(x, 32641, overlap=0)
        assert len(chunks) == 1
        assert plan.starts == [0]

    def test_two_chunks_no_overlap(self):
        chunks, _ = chunk_signal(np.zeros((1, 65282)), 32641, overlap=0)
        assert len(chunks) == 2

    def test_constant_signal_stitches_exactly(self):
        x = np.full((2, 50000), 0.7)
        chunks, plan = chunk_signal(x, 16257, overlap=512)
        y = stitch_chunks(chunks, plan)
        assert y.shape == x.shape
        assert np.max(np.abs(y - x)) < 1e-12

    def test_random_signal_stitches_exactly(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((1, 40000))
        chunks, plan = chunk_signal(x, 16257, overlap=512)
        assert np.max(np.abs(stitch_chunks(chunks, plan) - x)) < 1e-12


class TestRt60:
    @pytest.mark.parametrize("tau", [0.05, 0.1, 0.2, 0.5])
    def test_exponential_decay_oracle(self, tau):
        # analytic EDC slope of e^{-t/tau} noise is -8.6859/tau dB/s -> RT60 = 6.9078 tau;
        # a 10 tau window keeps the backward-integration truncation bias negligible
        sr = 16000
        rng = np.random.default_rng(9)
        t = np.arange(int(10 * tau * sr)) / sr
        h = np.exp(-t / tau) * rng.standard_normal(len(t))
        est = estimate_rt60(h, sr).seconds
        assert est == pytest.approx(6.9078 * tau, rel=0.05)

    def test_scale_invariance(self):
        sr = 16000
        rng = np.random.default_rng(2)
        t = np.arange(sr) / sr
        h = np.exp(-t / 0.1) * rng.standard_normal(len(t))
        a = estimate_rt60(h, sr).seconds
        b = estimate_rt60(123.4 * h, sr).seconds
        assert a == pytest.approx(b, rel=1e-12)

    def test_zero_echo_raises(self):
        with pytest.raises(ValueError):
            estimate_rt60(np.zeros(1000), 16000)

    def test_accepts_impulse_response(self):
        sr = 16000
        rng = np.random.default_rng(11)
        t = np.arange(sr) / sr
        ch = np.zeros((4, sr))
        ch[0] = np.exp(-t / 0.05) * rng.standard_normal(sr)
        est = estimate_rt60(ImpulseResponse(ch, sr))
        assert est.seconds == pytest.approx(6.9078 * 0.05, rel=0.05)


class TestMetrics:
    def test_identical_is_zero(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(20000) * 0.1
        y = rng.standard_normal(20000) * 0.1
        m = compute_metrics(_binaural(x, y), _binaural(x.copy(), y.copy()))
        assert m.as_array().tolist() == [0, 0, 0, 0]

    def test_swapped_channels_lre(self):
        # E_L = 2 E_R framewise: swapping channels gives LRE = 20 log10(2)
        rng = np.random.default_rng(4)
        r = rng.standard_normal(20000) * 0.1
        l = np.sqrt(2.0) * r
        m = compute_metrics(_binaural(r, l), _binaural(l, r))
        assert m.lre == pytest.approx(20 * np.log10(2), rel=1e-6)

    def test_scaled_prediction(self):
        rng = np.random.default_rng(8)
        l = rng.standard_normal(20000) * 0.2
        r = rng.standard_normal(20000) * 0.2
        gt = _binaural(l, r)
        pred = _binaural(2 * l, 2 * r)
        m = compute_metrics(pred, gt)
        assert m.lre == pytest.approx(0.0, abs=1e-9)
        sg = stft(gt.stereo).data
        expected_mag = float(np.mean(np.linalg.norm(np.abs(sg), axis=1)))
        assert m.mag == pytest.approx(expected_mag, rel=1e-10)

    def test_length_mismatch_raises(self):
        with pytest.raises(ValueError):
            compute_metrics(_binaural(np.zeros(100), np.zeros(100)), _binaural(np.zeros(90), np.zeros(90)))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_symmetry_and_nonnegativity(self, seed):
        rng = np.random.default_rng(seed)
        a = _binaural(rng.standard_normal(3000) * 0.1, rng.standard_normal(3000) * 0.1)
        b = _binaural(rng.standard_normal(3000) * 0.1, rng.standard_normal(3000) * 0.1)
        cfg = StftConfig(fft_size=254, win_length=254, hop=128)
        m1 = compute_metrics(a, b, cfg)
        m2 = compute_metrics(b, a, cfg)
        assert np.all(m1.as_array() >= 0)
        assert np.allclose(m1.as_array(), m2.as_array(), rtol=1e-9)


class TestLoudnessMap:
    def _grid(self):
        locs = np.array([[x, 0.0, 1.5] for x in (1.0, 2.0, 4.0)])
        return WalkableGrid(locations=locs, spacing=1.0)

    def test_silent_scene_floor(self):
        lm = loudness_map(lambda loc: np.zeros((2, 1000)), self._grid())
        assert np.all(lm.db == LOUDNESS_FLOOR_DB)

    def test_free_field_decay_monotone(self):
        def render(loc):
            d = max(float(loc[0]), 1e-3)
            return np.full((2, 1000), 0.5 / d)

        lm = loudness_map(render, self._grid())
        assert lm.db[0] > lm.db[1] > lm.db[2]

    def test_reproducible(self):
        rng_audio = np.random.default_rng(0).standard_normal((2, 500))

        def render(loc):
            return rng_audio * float(loc[0])

        a = loudness_map(render, self._grid())
        b = loudness_map(render, self._grid())
        assert np.array_equal(a.db, b.db)


def test_metrics_report_json_keys():
    m = MetricsReport(stft=1.0, mag=0.5, env=0.1, lre=0.2)
    assert set(m.to_dict()) == {"stft", "mag", "env", "lre"}


def test_hann_window_periodic_cola():
    w = hann_window(510)
    assert w[0] == 0.0
    # periodic Hann overlap-adds to a constant at hop = N/2
    acc = np.zeros(510 * 3)
    for s in range(0, len(acc) - 510, 255):
        acc[s : s + 510] += w
    core = acc[510:-510]
    assert np.allclose(core, core[0])
