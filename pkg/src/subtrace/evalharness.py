"""Evaluation protocols over simulated corpora.

Supervised: leave-one-trip-out, scoring every contiguous subtrip of a few
fixed lengths cut at the true dwell centers; a prediction counts only if
start interval, direction, and length all match. Semi-supervised: the trips
are re-split into random unlabeled rides, labels are bootstrapped from two
distinctive seed intervals, and one damped-weight model is evaluated the
same way. Robustness and defense runs reuse the subtrip machinery on paired
or noise-injected corpora.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import coord, segment, semisup
from .classify import IntervalEnsemble, TrainingSet, train_interval_ensemble
from .features import extract_features, fit_nvht_thresholds, FeatureConfig
from .infer import infer_trace, infer_with_segment_tolerance
from .model import MetroNetwork
from .pipeline import (
    Corpus,
    PipelineConfig,
    build_corpus,
    child_seed,
    interval_training_rows,
    seed_segments,
    train_ensemble_on,
    true_trip_layout,
)
from .simgen import apply_defense_noise, distinctive_intervals

log = logging.getLogger("subtrace.eval")

DEFAULT_LENGTHS = (3, 5, 7)
POINT_TOLERANCE_S = 10.0
SEED_INTERVALS = 2
SEED_TRAVERSALS = 20
DEFENSE_FACTOR = 5.0


# --- metrics ----------------------------------------------------------------


def edit_distance(pred: list[float], true: list[float], tolerance: float = POINT_TOLERANCE_S) -> int:
    """Levenshtein distance between point sequences; values match within tolerance."""
    np_, nt = len(pred), len(true)
    d = np.zeros((np_ + 1, nt + 1), dtype=int)
    d[:, 0] = np.arange(np_ + 1)
    d[0, :] = np.arange(nt + 1)
    for i in range(1, np_ + 1):
        for j in range(1, nt + 1):
            same = abs(pred[i - 1] - true[j - 1]) < tolerance
            d[i, j] = min(
                d[i - 1, j] + 1,
                d[i, j - 1] + 1,
                d[i - 1, j - 1] + (0 if same else 1),
            )
    return int(d[np_, nt])


def confusion_matrix(pairs: list[tuple[int, int]], k: int) -> np.ndarray:
    """Row-normalized percentage matrix of (true, predicted) interval pairs."""
    counts = np.zeros((k, k))
    for t, p in pairs:
        counts[t, p] += 1
    sums = counts.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        pct = np.where(sums > 0, 100.0 * counts / sums, 0.0)
    return pct


# --- subtrips -----------------------------------------------------------------


@dataclass(frozen=True)
class Subtrip:
    """One contiguous window of a trip, cut at true dwell centers."""

    trip: int
    start_leg: int
    length: int
    span: tuple[int, int]
    cuts_rel: tuple[int, ...]
    uids: tuple[int, ...]
    direction: str


def enumerate_subtrips(corpus: Corpus, lengths: tuple[int, ...]) -> list[Subtrip]:
    subtrips = []
    for ti, trace in enumerate(corpus.trips):
        lay = true_trip_layout(trace)
        bounds = [lay.span[0], *lay.cuts, lay.span[1]]
        for L in lengths:
            for j in range(lay.n_legs - L + 1):
                a, b = bounds[j], bounds[j + L]
                subtrips.append(
                    Subtrip(
                        trip=ti,
                        start_leg=j,
                        length=L,
                        span=(a, b),
                        cuts_rel=tuple(c - a for c in lay.cuts[j : j + L - 1]),
                        uids=lay.uids[j : j + L],
                        direction=lay.direction or "forward",
                    )
                )
    return subtrips


def _overlap_onehot(
    points: list[int], n: int, cuts_rel: tuple[int, ...], uids: tuple[int, ...], k: int
) -> np.ndarray:
    """One-hot rows labeling each detected segment by its dominant true leg."""
    true_bounds = [0, *cuts_rel, n]
    det_bounds = [0, *points, n]
    P = np.zeros((len(det_bounds) - 1, k))
    for r, (lo, hi) in enumerate(zip(det_bounds[:-1], det_bounds[1:])):
        overlaps = [
            min(hi, tb) - max(lo, ta) for ta, tb in zip(true_bounds[:-1], true_bounds[1:])
        ]
        P[r, uids[int(np.argmax(overlaps))]] = 1.0
    return P


def predict_subtrip(
    series: coord.EnuSeries,
    st: Subtrip,
    ensemble: IntervalEnsemble | None,
    network: MetroNetwork,
    seg_params: segment.SegmenterParams,
    segmenter: str = "pipeline",
    classifier: str = "model",
    mode: str = "full",
):
    """Run segmentation plus inference on one subtrip.

    segmenter="oracle" injects the true dwell centers; classifier="oracle"
    replaces the ensemble with overlap-true one-hot rows (and scores the
    detected cut layout only, since there is nothing to re-featurize with).
    """
    sub = series.view(*st.span)
    if segmenter == "oracle":
        points: list[int] = list(st.cuts_rel)
    else:
        points, _ = segment.find_final_segment_points(sub.hra, seg_params)

    try:
        if classifier == "oracle":
            P = _overlap_onehot(points, sub.n_samples, st.cuts_rel, st.uids, network.num_intervals)
            return infer_trace(P), len(points) + 1
        if mode == "full":
            res = infer_with_segment_tolerance(sub, ensemble, network, points=points)
            return res.best, len(points) + 1
        comp = sub.components()
        bounds = [0, *points, sub.n_samples]
        feats = [
            extract_features(comp[a:b], ensemble.config)
            for a, b in zip(bounds[:-1], bounds[1:])
        ]
        return infer_trace(ensemble.predict_matrix(feats)), len(points) + 1
    except ValueError:
        return None, len(points) + 1


@dataclass
class EvalReport:
    accuracy_by_length: dict[int, float]
    counts_by_length: dict[int, int]
    confusion: np.ndarray
    interval_accuracy: list[float]
    predictions: list[tuple[Subtrip, object]]

    def to_dict(self) -> dict:
        return {
            "accuracy_by_length": {str(k): v for k, v in sorted(self.accuracy_by_length.items())},
            "counts_by_length": {str(k): v for k, v in sorted(self.counts_by_length.items())},
            "confusion_percent": np.round(self.confusion, 2).tolist(),
            "interval_accuracy": [round(a, 4) for a in self.interval_accuracy],
        }


def evaluate_subtrips(
    corpus: Corpus,
    ensemble_for: Callable[[int], IntervalEnsemble | None],
    lengths: tuple[int, ...] = DEFAULT_LENGTHS,
    segmenter: str = "pipeline",
    classifier: str = "model",
    mode: str = "full",
    series_by_trip: list[coord.EnuSeries] | None = None,
) -> EvalReport:
    k = corpus.network.num_intervals
    seg_params = segment.params_for_network(corpus.network)
    if series_by_trip is None:
        series_by_trip = [coord.transform(t) for t in corpus.trips]

    correct = {L: 0 for L in lengths}
    totals = {L: 0 for L in lengths}
    pairs: list[tuple[int, int]] = []
    preds = []
    for st in enumerate_subtrips(corpus, lengths):
        hyp, _ = predict_subtrip(
            series_by_trip[st.trip], st, ensemble_for(st.trip), corpus.network,
            seg_params, segmenter, classifier, mode,
        )
        totals[st.length] += 1
        ok = (
            hyp is not None
            and hyp.start_interval == st.uids[0]
            and hyp.direction == st.direction
            and hyp.length == st.length
        )
        if ok:
            correct[st.length] += 1
        if hyp is not None and hyp.length == st.length:
            pairs.extend(zip(st.uids, hyp.interval_ids()))
        preds.append((st, hyp))

    per_interval = []
    for u in range(k):
        hits = [1 if p == t else 0 for t, p in pairs if t == u]
        per_interval.append(float(np.mean(hits)) if hits else 0.0)

    return EvalReport(
        accuracy_by_length={L: correct[L] / totals[L] if totals[L] else 0.0 for L in lengths},
        counts_by_length=totals,
        confusion=confusion_matrix(pairs, k),
        interval_accuracy=per_interval,
        predictions=preds,
    )


# --- supervised protocol ---------------------------------------------------------


def loo_supervised(
    corpus: Corpus,
    config: PipelineConfig,
    lengths: tuple[int, ...] = DEFAULT_LENGTHS,
    segmenter: str = "pipeline",
    classifier: str = "model",
    mode: str = "full",
) -> EvalReport:
    """Leave-one-trip-out evaluation of the supervised attack."""
    n_trips = len(corpus.trips)
    models: dict[int, IntervalEnsemble | None] = {}
    if classifier == "oracle":
        models = {ti: None for ti in range(n_trips)}
    else:
        for ti in range(n_trips):
            train_idx = [i for i in range(n_trips) if i != ti]
            segs, uids = interval_training_rows(corpus, train_idx)
            models[ti] = train_ensemble_on(segs, uids, corpus.network, config)
            log.info("fold %d/%d trained", ti + 1, n_trips)
    return evaluate_subtrips(
        corpus, lambda ti: models[ti], lengths, segmenter, classifier, mode
    )


def single_model_ensemble(corpus: Corpus, config: PipelineConfig) -> IntervalEnsemble:
    segs, uids = interval_training_rows(corpus)
    return train_ensemble_on(segs, uids, corpus.network, config)


# --- segmentation quality ---------------------------------------------------------


@dataclass
class SegmentationReport:
    distances: list[int]
    count_errors: list[int]
    within_one: float
    mean_distance: float

    def to_dict(self) -> dict:
        return {
            "within_one": round(self.within_one, 4),
            "mean_distance": round(self.mean_distance, 4),
            "distances": self.distances,
            "count_errors": self.count_errors,
        }


def segmentation_evaluation(corpus: Corpus) -> SegmentationReport:
    """Pipeline points vs true dwell centers on every full trip span."""
    seg_params = segment.params_for_network(corpus.network)
    rate = corpus.network.sample_rate
    distances, count_errors = [], []
    for trace in corpus.trips:
        series = coord.transform(trace)
        lay = true_trip_layout(trace)
        sub = series.view(*lay.span)
        points, _ = segment.find_final_segment_points(sub.hra, seg_params)
        pred_t = [p / rate for p in points]
        true_t = [(c - lay.span[0]) / rate for c in lay.cuts]
        distances.append(edit_distance(pred_t, true_t))
        count_errors.append(len(points) - len(lay.cuts))
    within = float(np.mean([abs(e) <= 1 for e in count_errors]))
    return SegmentationReport(
        distances=distances,
        count_errors=count_errors,
        within_one=within,
        mean_distance=float(np.mean(distances)),
    )


# --- semi-supervised protocol -------------------------------------------------------


def _random_chunks(n_legs: int, rng: np.random.Generator, lo: int = 2, hi: int = 5) -> list[int]:
    sizes = []
    rem = n_legs
    while rem > 0:
        size = min(int(rng.integers(lo, hi + 1)), rem)
        if rem - size == 1:
            size = min(size + 1, rem)
        sizes.append(size)
        rem -= size
    return sizes


@dataclass
class SemisupReport:
    rounds: int
    coverage_history: list[float]
    stalled: bool
    resolved_sequences: int
    total_sequences: int
    eval: EvalReport

    def to_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "coverage_history": [round(c, 4) for c in self.coverage_history],
            "stalled": self.stalled,
            "resolved_sequences": self.resolved_sequences,
            "total_sequences": self.total_sequences,
            **self.eval.to_dict(),
        }


def bootstrap_from_corpus(
    corpus: Corpus, config: PipelineConfig
) -> tuple[semisup.BootstrapResult, IntervalEnsemble, FeatureConfig, int]:
    """Unlabeled rides + seed traversals -> bootstrapped interval ensemble."""
    network = corpus.network
    seg_params = segment.params_for_network(network)

    # unlabeled rides: every trip re-split into random contiguous chunks
    chunk_segs: list[list[np.ndarray]] = []
    for ti, trace in enumerate(corpus.trips):
        series = coord.transform(trace)
        lay = true_trip_layout(trace)
        bounds = [lay.span[0], *lay.cuts, lay.span[1]]
        rng = np.random.default_rng(child_seed(config.seed, 5, ti))
        j = 0
        for size in _random_chunks(lay.n_legs, rng):
            a, b = bounds[j], bounds[j + size]
            sub = series.view(a, b)
            points, _ = segment.find_final_segment_points(sub.hra, seg_params)
            cuts = [0, *points, sub.n_samples]
            comp = sub.components()
            chunk_segs.append([comp[lo:hi] for lo, hi in zip(cuts[:-1], cuts[1:])])
            j += size

    fconfig = fit_nvht_thresholds(
        [s for chunk in chunk_segs for s in chunk], FeatureConfig(network.sample_rate)
    )
    sequences = [
        [extract_features(s, fconfig).vector() for s in chunk] for chunk in chunk_segs
    ]

    # seed detectors from a couple of distinctive intervals, both directions
    seed_uids = distinctive_intervals(corpus.profiles)[:SEED_INTERVALS]
    seed_vectors: dict[int, np.ndarray] = {}
    for uid in seed_uids:
        for direction in ("forward", "reverse"):
            gid = network.directed(uid, direction)
            segs = seed_segments(
                network, corpus.profiles, uid, direction, SEED_TRAVERSALS,
                config.noise, config.seed,
            )
            seed_vectors[gid] = np.stack(
                [extract_features(s, fconfig).vector() for s in segs]
            )

    all_vectors = np.stack([v for seq in sequences for v in seq])
    neg_rng = np.random.default_rng(child_seed(config.seed, 6))
    seeds = []
    for gid, pos in seed_vectors.items():
        others = [v for g, vv in seed_vectors.items() if g != gid for v in vv]
        idx = neg_rng.choice(len(all_vectors), size=min(3 * len(pos), len(all_vectors)), replace=False)
        neg = np.concatenate([np.stack(others), all_vectors[idx]])
        seeds.append(semisup.train_seed_classifier(gid, pos, neg))

    result = semisup.bootstrap(
        sequences, seeds, network,
        threshold=config.enough_labels,
        max_rounds=config.max_rounds,
        seed=child_seed(config.seed, 7),
    )

    X, y, w = semisup.build_training_set(result.pools, network)
    train = TrainingSet(X=X, y=y, n_classes=network.num_intervals, sample_weight=w)
    ensemble = train_interval_ensemble(
        train, fconfig,
        boost_rounds=config.boost_rounds,
        n_trees=config.n_trees,
        seed=child_seed(config.seed, 8),
    )
    return result, ensemble, fconfig, len(sequences)


def semisupervised_evaluation(
    corpus: Corpus, config: PipelineConfig, lengths: tuple[int, ...] = DEFAULT_LENGTHS
) -> SemisupReport:
    result, ensemble, _, n_sequences = bootstrap_from_corpus(corpus, config)
    report = evaluate_subtrips(corpus, lambda _: ensemble, lengths)
    return SemisupReport(
        rounds=result.rounds_run,
        coverage_history=result.coverage_history,
        stalled=result.stalled,
        resolved_sequences=len(result.resolved),
        total_sequences=n_sequences,
        eval=report,
    )


# --- robustness and defense -----------------------------------------------------------


def paired_corpus(config: PipelineConfig, **noise_overrides) -> Corpus:
    """Same seeds, different noise: motion is identical sample for sample."""
    return build_corpus(replace(config, noise=replace(config.noise, **noise_overrides)))


def prediction_flips(
    corpus_a: Corpus,
    corpus_b: Corpus,
    ensemble: IntervalEnsemble,
    lengths: tuple[int, ...] = (5,),
) -> float:
    """Fraction of paired subtrips whose predicted ride changes between corpora."""
    rep_a = evaluate_subtrips(corpus_a, lambda _: ensemble, lengths)
    rep_b = evaluate_subtrips(corpus_b, lambda _: ensemble, lengths)
    flips = 0
    for (_, ha), (_, hb) in zip(rep_a.predictions, rep_b.predictions):
        ta = None if ha is None else (ha.start_interval, ha.direction, ha.length)
        tb = None if hb is None else (hb.start_interval, hb.direction, hb.length)
        flips += ta != tb
    return flips / len(rep_a.predictions)


def defended_corpus(corpus: Corpus, config: PipelineConfig, factor: float = DEFENSE_FACTOR) -> tuple[Corpus, float]:
    """Inject white noise at factor x the corpus mean ride HRA into every trip."""
    hra_means = []
    for trace in corpus.trips:
        series = coord.transform(trace)
        lay = true_trip_layout(trace)
        hra_means.append(float(np.mean(series.hra[lay.span[0] : lay.span[1]])))
    amp = factor * float(np.mean(hra_means))
    defended = [
        apply_defense_noise(t, amp, child_seed(config.seed, 9, ti))
        for ti, t in enumerate(corpus.trips)
    ]
    guarded = Corpus(
        network=corpus.network,
        profiles=corpus.profiles,
        trips=defended,
        modes=corpus.modes,
        manifest=corpus.manifest,
    )
    return guarded, amp


def mode_agreement(
    corpus: Corpus, ensemble: IntervalEnsemble, lengths: tuple[int, ...] = DEFAULT_LENGTHS
) -> float:
    """How often the tolerance search and plain detected-cut scoring agree."""
    full = evaluate_subtrips(corpus, lambda _: ensemble, lengths, mode="full")
    reduced = evaluate_subtrips(corpus, lambda _: ensemble, lengths, mode="reduced")
    same = 0
    for (_, hf), (_, hr) in zip(full.predictions, reduced.predictions):
        tf = None if hf is None else (hf.start_interval, hf.direction, hf.length)
        tr = None if hr is None else (hr.start_interval, hr.direction, hr.length)
        same += tf == tr
    return same / len(full.predictions)
