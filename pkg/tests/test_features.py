"""Feature extraction oracles: loop-based smoothing, closed-form spectra,
hand-ranked extrema."""

from __future__ import annotations

import numpy as np
import pytest

from subtrace.features import (
    FEATURE_DIM,
    NVHT_PERCENTILES,
    STATS_DIM,
    FeatureConfig,
    extract_features,
    fit_nvht_thresholds,
    peak_features,
    smooth,
    statistical_features,
)

THRESHOLDS = (0.5, 2.5, 3.5)


def smooth_oracle(x: np.ndarray, k: int) -> np.ndarray:
    if k % 2 == 0:
        k += 1
    h = k // 2
    n = len(x)
    return np.array([np.mean(x[max(0, i - h) : min(n, i + h + 1)]) for i in range(n)])


class TestFeatureConfig:
    def test_peak_windows(self):
        cfg = FeatureConfig(sample_rate=10.0)
        assert cfg.peak_windows() == (10, 20, 40)

    def test_peak_windows_floor_one(self):
        cfg = FeatureConfig(sample_rate=10.0, peak_windows_s=(0.04,))
        assert cfg.peak_windows() == (1,)

    @pytest.mark.parametrize(
        "kw",
        [
            {"sample_rate": 0.0},
            {"sample_rate": -1.0},
            {"sample_rate": 10.0, "smooth_k": 0},
            {"sample_rate": 10.0, "peak_windows_s": ()},
        ],
    )
    def test_rejects_bad_values(self, kw):
        with pytest.raises(ValueError):
            FeatureConfig(**kw)

    def test_dict_round_trip(self):
        cfg = FeatureConfig(
            sample_rate=10.0,
            smooth_k=7,
            peak_windows_s=(1.0, 3.0),
            nvht_thresholds=((1.0, 2.0, 3.0), (4.0, 5.0, 6.0), (7.0, 8.0, 9.0)),
        )
        back = FeatureConfig.from_dict(cfg.to_dict())
        assert back == cfg

    def test_dict_round_trip_unfitted(self):
        cfg = FeatureConfig(sample_rate=5.0)
        assert FeatureConfig.from_dict(cfg.to_dict()) == cfg


class TestSmooth:
    @pytest.mark.parametrize("k", [1, 3, 4, 9, 51])
    def test_matches_loop_oracle(self, k):
        rng = np.random.default_rng(3)
        x = rng.normal(size=50)
        assert np.allclose(smooth(x, k), smooth_oracle(x, k), atol=1e-12)

    def test_k_one_returns_copy(self):
        x = np.arange(5.0)
        out = smooth(x, 1)
        assert np.array_equal(out, x)
        out[0] = 99.0
        assert x[0] == 0.0

    def test_even_k_widened(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=30)
        assert np.array_equal(smooth(x, 8), smooth(x, 9))

    def test_constant_unchanged(self):
        x = np.full(20, 2.5)
        assert np.allclose(smooth(x, 9), x)

    def test_empty(self):
        assert smooth(np.empty(0), 9).size == 0

    def test_bad_width(self):
        with pytest.raises(ValueError):
            smooth(np.arange(5.0), 0)


class TestStatisticalFeatures:
    def test_layout_and_moments(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        feats = statistical_features(x, THRESHOLDS)
        assert feats.shape == (STATS_DIM,)
        assert feats[0] == pytest.approx(2.5)  # mean
        assert feats[1] == pytest.approx(4.0)  # max
        assert feats[2] == pytest.approx(np.sqrt(1.25))  # std
        assert feats[3] == pytest.approx(2.5)  # mean |x|
        assert feats[4:7] == pytest.approx([4.0, 2.0, 1.0])  # exceedances

    def test_pure_tone_spectrum(self):
        # 32 samples of a bin-5 cosine: FFT magnitude n/2 at bin 5, zero
        # elsewhere, so entropy vanishes and the peak index is 5
        k = np.arange(32)
        x = np.cos(2 * np.pi * 5 * k / 32)
        feats = statistical_features(x, THRESHOLDS)
        bins = feats[7:13]
        assert bins[4] == pytest.approx(16.0)
        assert np.all(np.abs(np.delete(bins, 4)) < 1e-9)
        assert feats[13] == pytest.approx(0.0, abs=1e-9)  # entropy
        assert feats[14] == 5.0  # peak bin

    def test_two_tone_entropy(self):
        # power 4:1 between bins 2 and 5 gives a closed-form entropy
        k = np.arange(32)
        x = 2.0 * np.cos(2 * np.pi * 2 * k / 32) + np.cos(2 * np.pi * 5 * k / 32)
        feats = statistical_features(x, THRESHOLDS)
        assert feats[7 + 1] == pytest.approx(32.0)
        assert feats[7 + 4] == pytest.approx(16.0)
        expected = -(0.8 * np.log(0.8) + 0.2 * np.log(0.2))
        assert feats[13] == pytest.approx(expected)
        assert feats[14] == 2.0

    def test_zero_series(self):
        feats = statistical_features(np.zeros(10), THRESHOLDS)
        assert np.array_equal(feats, np.zeros(STATS_DIM))

    def test_constant_series_hits_zero_spectrum_branch(self):
        feats = statistical_features(np.full(10, 3.0), THRESHOLDS)
        assert feats[0] == 3.0 and feats[1] == 3.0 and feats[3] == 3.0
        assert feats[2] == 0.0
        assert feats[4:7] == pytest.approx([10.0, 10.0, 0.0])
        assert np.array_equal(feats[7:], np.zeros(8))

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            statistical_features(np.empty(0), THRESHOLDS)


class TestPeakFeatures:
    def test_hand_ranked_extrema(self):
        # spikes at 20 (3.0), 70 (7.0) and a dip at 45 (-5.0); all three
        # window sizes nominate both spikes, so they outrank the zero
        # clusters, and the dip cluster absorbs the nearby zero nominees
        x = np.zeros(100)
        x[20], x[70], x[45] = 3.0, 7.0, -5.0
        out = peak_features(x, (10, 20, 50))
        assert out == pytest.approx(
            [7.0, 0.70, 3.0, 0.20, 0.0, 0.0, -5.0, 0.45, 0.0, 0.0, 0.0, 0.21]
        )

    def test_tail_window_nominates(self):
        # lone spike in the trailing partial window still gets nominated,
        # but the two merged zero nominees outrank it on cluster size
        x = np.zeros(25)
        x[22] = 9.0
        out = peak_features(x, (10,))
        assert out[:6] == pytest.approx([0.0, 0.0, 9.0, 0.88, 0.0, 0.0])

    def test_mirror_symmetry(self):
        # negating the series swaps the peak and valley blocks with
        # amplitudes negated and positions unchanged
        rng = np.random.default_rng(5)
        x = rng.normal(size=200)
        ws = (7, 13, 31)
        pf = peak_features(x, ws)
        nf = peak_features(-x, ws)
        assert nf[0:6:2] == pytest.approx(-pf[6:12:2])
        assert nf[1:6:2] == pytest.approx(pf[7:12:2])
        assert nf[6:12:2] == pytest.approx(-pf[0:6:2])
        assert nf[7:12:2] == pytest.approx(pf[1:6:2])

    def test_short_series_pads(self):
        out = peak_features(np.array([1.0, 2.0]), (10,))
        assert out.shape == (12,)
        assert out[0] == 2.0 and out[1] == 0.5
        assert out[6] == 1.0 and out[7] == 0.0

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            peak_features(np.empty(0), (10,))


class TestExtractFeatures:
    @pytest.fixture()
    def cfg(self):
        return FeatureConfig(
            sample_rate=10.0,
            nvht_thresholds=((0.1, 0.2, 0.3),) * 3,
        )

    def test_vector_layout(self, cfg):
        rng = np.random.default_rng(6)
        seg = rng.normal(size=(120, 3))
        feats = extract_features(seg, cfg)
        vec = feats.vector()
        assert vec.shape == (FEATURE_DIM,)
        assert np.all(np.isfinite(vec))
        assert vec[3 * STATS_DIM] == 120.0
        assert feats.length == 120

    def test_composes_from_parts(self, cfg):
        rng = np.random.default_rng(7)
        seg = rng.normal(size=(80, 3))
        sm = [smooth(seg[:, c], cfg.smooth_k) for c in range(3)]
        expected = np.concatenate(
            [statistical_features(sm[c], cfg.nvht_thresholds[c]) for c in range(3)]
            + [[80.0]]
            + [peak_features(sm[c], cfg.peak_windows()) for c in range(3)]
        )
        assert np.array_equal(extract_features(seg, cfg).vector(), expected)

    def test_deterministic(self, cfg):
        rng = np.random.default_rng(8)
        seg = rng.normal(size=(60, 3))
        a = extract_features(seg, cfg).vector()
        b = extract_features(seg, cfg).vector()
        assert np.array_equal(a, b)

    def test_unfitted_config_rejected(self):
        cfg = FeatureConfig(sample_rate=10.0)
        with pytest.raises(ValueError):
            extract_features(np.zeros((50, 3)), cfg)

    @pytest.mark.parametrize("shape", [(50,), (50, 2), (0, 3)])
    def test_bad_segment_shape(self, cfg, shape):
        with pytest.raises(ValueError):
            extract_features(np.zeros(shape), cfg)


class TestFitThresholds:
    def test_pooled_percentiles(self):
        rng = np.random.default_rng(9)
        segs = [rng.normal(size=(40, 3)), rng.normal(size=(60, 3))]
        cfg = FeatureConfig(sample_rate=10.0, smooth_k=5)
        fitted = fit_nvht_thresholds(segs, cfg)
        for c in range(3):
            pooled = np.concatenate([np.abs(smooth(s[:, c], 5)) for s in segs])
            want = tuple(np.percentile(pooled, p) for p in NVHT_PERCENTILES)
            assert fitted.nvht_thresholds[c] == pytest.approx(want)

    def test_original_config_untouched(self):
        cfg = FeatureConfig(sample_rate=10.0)
        fit_nvht_thresholds([np.ones((30, 3))], cfg)
        assert cfg.nvht_thresholds is None

    def test_no_segments(self):
        with pytest.raises(ValueError):
            fit_nvht_thresholds([], FeatureConfig(sample_rate=10.0))
