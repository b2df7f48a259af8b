"""Per-segment feature extraction for interval classification.

Each detected segment yields an 82-dimensional vector: fifteen statistical
and spectral features per Earth-frame component (east, north, vertical),
the segment length in samples, and six ranked extrema (three peaks, three
valleys) per component with their amplitudes and relative positions.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

DEFAULT_SMOOTH_K = 9
DEFAULT_PEAK_WINDOWS_S = (1.0, 2.0, 4.0)
NVHT_PERCENTILES = (50.0, 75.0, 90.0)
N_FFT_BINS = 6
N_EXTREMA = 3

STATS_DIM = 4 + 3 + N_FFT_BINS + 2  # mean/max/std/mav, nvht x3, fft bins, entropy, peak pos
PEAKS_DIM = 2 * N_EXTREMA * 2  # (amp, pos) for peaks and valleys
FEATURE_DIM = 3 * STATS_DIM + 1 + 3 * PEAKS_DIM


@dataclass(frozen=True)
class FeatureConfig:
    """Everything the extractor needs, so train and attack agree exactly."""

    sample_rate: float
    smooth_k: int = DEFAULT_SMOOTH_K
    peak_windows_s: tuple[float, ...] = DEFAULT_PEAK_WINDOWS_S
    nvht_thresholds: tuple[tuple[float, float, float], ...] | None = None

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.smooth_k < 1:
            raise ValueError("smooth_k must be >= 1")
        if not self.peak_windows_s:
            raise ValueError("need at least one peak window size")

    def peak_windows(self) -> tuple[int, ...]:
        return tuple(max(1, int(round(s * self.sample_rate))) for s in self.peak_windows_s)

    def to_dict(self) -> dict:
        return {
            "sample_rate": self.sample_rate,
            "smooth_k": self.smooth_k,
            "peak_windows_s": list(self.peak_windows_s),
            "nvht_thresholds": None
            if self.nvht_thresholds is None
            else [list(t) for t in self.nvht_thresholds],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureConfig":
        thr = doc["nvht_thresholds"]
        return cls(
            sample_rate=float(doc["sample_rate"]),
            smooth_k=int(doc["smooth_k"]),
            peak_windows_s=tuple(float(s) for s in doc["peak_windows_s"]),
            nvht_thresholds=None if thr is None else tuple(tuple(t) for t in thr),
        )


def smooth(series: np.ndarray, k: int = DEFAULT_SMOOTH_K) -> np.ndarray:
    """Centered moving average; even k is widened by one, edges truncate."""
    if k < 1:
        raise ValueError("smoothing width must be >= 1")
    if k % 2 == 0:
        k += 1
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n == 0 or k == 1:
        return x.copy()
    h = k // 2
    cs = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(n)
    lo = np.maximum(idx - h, 0)
    hi = np.minimum(idx + h + 1, n)
    return (cs[hi] - cs[lo]) / (hi - lo)


def statistical_features(
    series: np.ndarray, thresholds: tuple[float, float, float]
) -> np.ndarray:
    """Fifteen stats of one smoothed component.

    Layout: mean, max, std, mean absolute value, three exceedance counts,
    magnitudes of FFT bins 1..6 (mean removed, zero-padded to a power of
    two of at least 16), spectral entropy over bins 1..nfft/2, and the
    1-based index of the strongest of those bins. An all-zero spectrum
    reports entropy 0 and peak position 0.
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n == 0:
        raise ValueError("empty series")
    mean = float(np.mean(x))
    counts = [float(np.sum(np.abs(x) > t)) for t in thresholds]

    nfft = max(16, 1 << (n - 1).bit_length())
    spec = np.abs(np.fft.rfft(x - mean, nfft))
    bins = spec[1 : N_FFT_BINS + 1]
    power = spec[1 : nfft // 2 + 1] ** 2
    total = float(power.sum())
    if total > 0.0:
        p = power / total
        p = p[p > 0]
        entropy = float(-np.sum(p * np.log(p)))
        peak_pos = float(np.argmax(power) + 1)
    else:
        entropy = 0.0
        peak_pos = 0.0

    return np.array(
        [
            mean,
            float(np.max(x)),
            float(np.std(x)),
            float(np.mean(np.abs(x))),
            *counts,
            *bins,
            entropy,
            peak_pos,
        ]
    )


def _window_extrema(x: np.ndarray, w: int, sign: int) -> list[tuple[float, int]]:
    """Top extrema of equal chopped windows: up to 3 (value, index) pairs."""
    n = len(x)
    n_full = n // w
    idx: list[int] = []
    if n_full:
        blocks = (sign * x[: n_full * w]).reshape(n_full, w)
        idx.extend((np.argmax(blocks, axis=1) + np.arange(n_full) * w).tolist())
    if n_full * w < n:
        tail = x[n_full * w :]
        idx.append(n_full * w + int(np.argmax(sign * tail)))
    cands = [(float(x[i]), int(i)) for i in idx]
    cands.sort(key=lambda c: (-sign * c[0], c[1]))
    return cands[:N_EXTREMA]


def _rank_clusters(
    cands: list[tuple[float, int]], merge_dist: int, n: int, sign: int
) -> list[float]:
    """Merge near-coincident extrema across window sizes and rank them.

    A cluster's strength is how many window sizes nominated it, then its
    amplitude. Output is 3 x (amplitude, position fraction), zero-padded.
    """
    clusters: list[list[tuple[float, int]]] = []
    for val, idx in sorted(cands, key=lambda c: c[1]):
        if clusters and idx - clusters[-1][-1][1] <= merge_dist:
            clusters[-1].append((val, idx))
        else:
            clusters.append([(val, idx)])

    ranked = []
    for members in clusters:
        wins = len(members)
        best = max(members, key=lambda c: (sign * c[0], -c[1]))
        ranked.append((wins, best[0], best[1]))
    ranked.sort(key=lambda r: (-r[0], -sign * r[1], r[2]))

    out: list[float] = []
    for _, val, idx in ranked[:N_EXTREMA]:
        out.extend([val, idx / n])
    while len(out) < 2 * N_EXTREMA:
        out.extend([0.0, 0.0])
    return out


def peak_features(series: np.ndarray, window_sizes: tuple[int, ...]) -> np.ndarray:
    """Three strongest peaks and valleys of a smoothed component.

    Every window size nominates its top extrema independently; nominations
    within the smallest window size of each other merge into one candidate,
    and candidates backed by more window sizes outrank stronger loners.
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n == 0:
        raise ValueError("empty series")
    merge_dist = min(window_sizes)
    peaks: list[tuple[float, int]] = []
    valleys: list[tuple[float, int]] = []
    for w in window_sizes:
        peaks.extend(_window_extrema(x, w, +1))
        valleys.extend(_window_extrema(x, w, -1))
    return np.array(
        _rank_clusters(peaks, merge_dist, n, +1)
        + _rank_clusters(valleys, merge_dist, n, -1)
    )


@dataclass(frozen=True)
class SegmentFeatures:
    """Stats and extrema per component plus the segment length."""

    stats: tuple[np.ndarray, np.ndarray, np.ndarray]
    peaks: tuple[np.ndarray, np.ndarray, np.ndarray]
    length: int

    def vector(self) -> np.ndarray:
        vec = np.concatenate([*self.stats, [float(self.length)], *self.peaks])
        assert vec.shape == (FEATURE_DIM,)
        return vec


def extract_features(segment: np.ndarray, config: FeatureConfig) -> SegmentFeatures:
    """Featurize one (n, 3) Earth-frame segment of (east, north, vertical)."""
    seg = np.asarray(segment, dtype=float)
    if seg.ndim != 2 or seg.shape[1] != 3:
        raise ValueError(f"expected (n, 3) segment, got {seg.shape}")
    if len(seg) == 0:
        raise ValueError("empty segment")
    if config.nvht_thresholds is None:
        raise ValueError("feature config has no fitted exceedance thresholds")
    windows = config.peak_windows()
    sm = [smooth(seg[:, ci], config.smooth_k) for ci in range(3)]
    stats = tuple(
        statistical_features(sm[ci], config.nvht_thresholds[ci]) for ci in range(3)
    )
    peaks = tuple(peak_features(sm[ci], windows) for ci in range(3))
    return SegmentFeatures(stats=stats, peaks=peaks, length=len(seg))


def fit_nvht_thresholds(
    segments: list[np.ndarray], config: FeatureConfig
) -> FeatureConfig:
    """Set per-component exceedance thresholds from training segments."""
    if not segments:
        raise ValueError("no segments to fit thresholds")
    pooled = [[] for _ in range(3)]
    for seg in segments:
        seg = np.asarray(seg, dtype=float)
        for ci in range(3):
            pooled[ci].append(np.abs(smooth(seg[:, ci], config.smooth_k)))
    thresholds = tuple(
        tuple(float(np.percentile(np.concatenate(pooled[ci]), p)) for p in NVHT_PERCENTILES)
        for ci in range(3)
    )
    return replace(config, nvht_thresholds=thresholds)
