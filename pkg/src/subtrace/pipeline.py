"""End-to-end glue: corpora on disk, model bundles, and the full attack.

A corpus directory holds one network, its track profiles, simulated trips,
and other-mode recordings, all reproducible from the seed in its manifest.
An attack model bundles the ride extractor, the interval ensemble, and the
segmenter settings into a single JSON document.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import coord, segment
from .classify import IntervalEnsemble, TrainingSet, train_interval_ensemble
from .extract import ModeModel, extract_spans, fit_thresholds, train_mode_classifier, window_features
from .features import FeatureConfig, SegmentFeatures, extract_features, fit_nvht_thresholds
from .infer import TraceHypothesis, infer_trace, infer_with_segment_tolerance, rank_hypotheses
from .model import (
    MetroNetwork,
    Trace,
    TraceFormatError,
    load_network,
    load_trace,
    network_from_dict,
    network_to_dict,
    save_network,
    save_trace,
)
from .simgen import (
    MODES,
    NoiseConfig,
    TrackProfile,
    gen_mixed_day,
    gen_network,
    gen_other_mode,
    gen_trip,
    load_profiles,
    save_profiles,
)

DEFAULT_TRIPS = 40
DEFAULT_MODE_DURATION = 1200.0


@dataclass(frozen=True)
class PipelineConfig:
    """Defaults for corpus generation and model training."""

    seed: int = 7
    num_intervals: int = 10
    sample_rate: float = 10.0
    n_trips: int = DEFAULT_TRIPS
    mode_duration: float = DEFAULT_MODE_DURATION
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    boost_rounds: int = 12
    n_trees: int = 60
    enough_labels: int = 20
    max_rounds: int = 12

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["noise"] = asdict(self.noise)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        doc = dict(doc)
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "noise" in doc:
            noise_doc = doc["noise"]
            bad = set(noise_doc) - set(NoiseConfig.__dataclass_fields__)
            if bad:
                raise ValueError(f"unknown noise keys: {sorted(bad)}")
            doc["noise"] = NoiseConfig(**noise_doc)
        return cls(**doc)


def child_seed(root: int, *path: int) -> int:
    """Stable derived seed for one corpus artifact."""
    return int(np.random.SeedSequence([root, *path]).generate_state(1)[0])


# --- corpus -------------------------------------------------------------------


@dataclass
class Corpus:
    network: MetroNetwork
    profiles: list[TrackProfile]
    trips: list[Trace]
    modes: list[Trace]
    manifest: dict

    @property
    def trip_meta(self) -> list[dict]:
        return self.manifest["trips"]


def _trip_plan(config: PipelineConfig) -> list[dict]:
    k = config.num_intervals
    plan = []
    for i in range(config.n_trips):
        forward = i % 2 == 0
        plan.append(
            {
                "file": f"trips/trip_{i:03d}.jsonl",
                "start": 0 if forward else k,
                "length": k,
                "direction": "forward" if forward else "reverse",
                "seed": child_seed(config.seed, 1, i),
            }
        )
    return plan


def _mode_plan(config: PipelineConfig) -> list[dict]:
    return [
        {
            "file": f"modes/{mode}.jsonl",
            "mode": mode,
            "duration": config.mode_duration,
            "seed": child_seed(config.seed, 2, j),
        }
        for j, mode in enumerate(MODES)
    ]


def build_corpus(config: PipelineConfig, out_dir: str | Path | None = None) -> Corpus:
    """Simulate the default corpus; write it out when a directory is given."""
    network, profiles = gen_network(
        config.num_intervals, seed=child_seed(config.seed, 0), sample_rate=config.sample_rate
    )
    trip_plan = _trip_plan(config)
    mode_plan = _mode_plan(config)

    trips = [
        gen_trip(network, profiles, p["start"], p["length"], config.noise, p["seed"])
        for p in trip_plan
    ]
    modes = [
        gen_other_mode(p["mode"], p["duration"], config.noise, p["seed"], config.sample_rate)
        for p in mode_plan
    ]
    manifest = {
        "config": config.to_dict(),
        "network": "network.json",
        "profiles": "profiles.json",
        "trips": trip_plan,
        "modes": mode_plan,
    }
    corpus = Corpus(network, profiles, trips, modes, manifest)
    if out_dir is not None:
        write_corpus(corpus, out_dir)
    return corpus


def write_corpus(corpus: Corpus, out_dir: str | Path) -> None:
    out = Path(out_dir)
    (out / "trips").mkdir(parents=True, exist_ok=True)
    (out / "modes").mkdir(parents=True, exist_ok=True)
    save_network(corpus.network, out / "network.json")
    save_profiles(corpus.profiles, out / "profiles.json")
    for meta, trace in zip(corpus.trip_meta, corpus.trips):
        save_trace(trace, out / meta["file"])
    for meta, trace in zip(corpus.manifest["modes"], corpus.modes):
        save_trace(trace, out / meta["file"])
    (out / "manifest.json").write_text(
        json.dumps(corpus.manifest, indent=2, sort_keys=True, allow_nan=False) + "\n"
    )


def load_corpus(path: str | Path) -> Corpus:
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise TraceFormatError(f"{root}: no manifest.json, not a corpus directory")
    try:
        manifest = json.loads(manifest_path.read_text())
        trips = [load_trace(root / m["file"]) for m in manifest["trips"]]
        modes = [load_trace(root / m["file"]) for m in manifest["modes"]]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise TraceFormatError(f"{manifest_path}: bad manifest ({exc})")
    network = load_network(root / manifest["network"])
    profiles = load_profiles(root / manifest["profiles"])
    return Corpus(network, profiles, trips, modes, manifest)


# --- ground-truth layout --------------------------------------------------------


@dataclass(frozen=True)
class TrueTrip:
    """Sample-space layout of one simulated trip, from its truth trailer."""

    span: tuple[int, int]
    cuts: tuple[int, ...]  # interior dwell centers, in samples
    cut_times: tuple[float, ...]
    uids: tuple[int, ...]
    direction: str | None

    @property
    def n_legs(self) -> int:
        return len(self.uids)


def true_trip_layout(trace: Trace) -> TrueTrip:
    metro = trace.truth_ranges("metro")
    if len(metro) != 1:
        raise ValueError(f"expected one metro range, found {len(metro)}")
    dwells = sorted(trace.truth_ranges("dwell"), key=lambda r: r.start)
    legs = sorted(trace.truth_ranges("interval:"), key=lambda r: r.start)
    if not legs:
        raise ValueError("trip truth has no interval ranges")
    uids = tuple(int(r.label.split(":", 1)[1]) for r in legs)
    cut_times = tuple(0.5 * (d.start + d.end) for d in dwells)
    a, b = metro[0].start, metro[0].end
    span = (int(np.searchsorted(trace.t, a)), int(np.searchsorted(trace.t, b)))
    cuts = tuple(int(np.searchsorted(trace.t, ct)) for ct in cut_times)
    direction = None
    if len(uids) > 1:
        direction = "forward" if uids[1] > uids[0] else "reverse"
    return TrueTrip(span, cuts, cut_times, uids, direction)


def true_segments(trace: Trace, series: coord.EnuSeries | None = None) -> list[tuple[np.ndarray, int]]:
    """Earth-frame (n, 3) arrays cut at the true dwell centers, with labels."""
    if series is None:
        series = coord.transform(trace)
    layout = true_trip_layout(trace)
    comp = series.components()
    bounds = [layout.span[0], *layout.cuts, layout.span[1]]
    return [
        (comp[lo:hi], uid) for (lo, hi), uid in zip(zip(bounds[:-1], bounds[1:]), layout.uids)
    ]


# --- training -------------------------------------------------------------------


def mode_window_size(network: MetroNetwork) -> int:
    return int(round(network.sample_rate * network.min_interval_duration)) // 2


def train_mode_model(corpus: Corpus) -> ModeModel:
    """Metro / non-metro window classifier from the corpus recordings."""
    m = mode_window_size(corpus.network)
    metro_hra = [coord.transform(tr).hra for tr in corpus.trips]
    thresholds = fit_thresholds(np.concatenate(metro_hra))

    rows, labels = [], []
    for hra in metro_hra:
        for s in range(0, len(hra), m):
            rows.append(window_features(hra, s, m, thresholds))
            labels.append(1)
    for tr in corpus.modes:
        hra = coord.transform(tr).hra
        for s in range(0, len(hra), m):
            rows.append(window_features(hra, s, m, thresholds))
            labels.append(0)
    return train_mode_classifier(np.stack(rows), np.array(labels), thresholds, m)


def interval_training_rows(
    corpus: Corpus, trip_idx: list[int] | None = None
) -> tuple[list[np.ndarray], list[int]]:
    """True-cut training segments and their interval labels."""
    segments, uids = [], []
    idx = range(len(corpus.trips)) if trip_idx is None else trip_idx
    for i in idx:
        for seg, uid in true_segments(corpus.trips[i]):
            segments.append(seg)
            uids.append(uid)
    return segments, uids


def fit_feature_config(segments: list[np.ndarray], sample_rate: float) -> FeatureConfig:
    return fit_nvht_thresholds(segments, FeatureConfig(sample_rate=sample_rate))


def train_ensemble_on(
    segments: list[np.ndarray],
    uids: list[int],
    network: MetroNetwork,
    config: PipelineConfig,
    sample_weight: np.ndarray | None = None,
) -> IntervalEnsemble:
    fconfig = fit_feature_config(segments, network.sample_rate)
    feats = [extract_features(s, fconfig) for s in segments]
    train = TrainingSet(
        X=np.stack([f.vector() for f in feats]),
        y=np.array(uids, int),
        n_classes=network.num_intervals,
        sample_weight=sample_weight,
    )
    return train_interval_ensemble(
        train,
        fconfig,
        boost_rounds=config.boost_rounds,
        n_trees=config.n_trees,
        seed=child_seed(config.seed, 3),
    )


@dataclass
class AttackModel:
    """Everything needed to run the attack on a raw trace."""

    network: MetroNetwork
    mode_model: ModeModel
    ensemble: IntervalEnsemble
    seg_params: segment.SegmenterParams

    def to_dict(self) -> dict:
        sp = self.seg_params
        return {
            "schema_version": 1,
            "kind": "attack_model",
            "network": network_to_dict(self.network),
            "mode_model": self.mode_model.to_dict(),
            "ensemble": self.ensemble.to_dict(),
            "segmenter": {
                "l_w": sp.l_w,
                "l_min": sp.l_min,
                "l_max": sp.l_max,
                "t1": sp.t1,
                "delta": sp.delta,
                "quorum": sp.quorum,
                "max_escalations": sp.max_escalations,
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AttackModel":
        if doc.get("kind") != "attack_model" or doc.get("schema_version") != 1:
            raise ValueError("not a version-1 attack model document")
        sp = doc["segmenter"]
        return cls(
            network=network_from_dict(doc["network"], source="attack model"),
            mode_model=ModeModel.from_dict(doc["mode_model"]),
            ensemble=IntervalEnsemble.from_dict(doc["ensemble"]),
            seg_params=segment.SegmenterParams(
                l_w=int(sp["l_w"]),
                l_min=int(sp["l_min"]),
                l_max=int(sp["l_max"]),
                t1=sp["t1"],
                delta=sp["delta"],
                quorum=float(sp["quorum"]),
                max_escalations=int(sp["max_escalations"]),
            ),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"
        )

    @classmethod
    def load(cls, path: str | Path) -> "AttackModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def train_attack_model(corpus: Corpus, config: PipelineConfig) -> AttackModel:
    segments, uids = interval_training_rows(corpus)
    ensemble = train_ensemble_on(segments, uids, corpus.network, config)
    return AttackModel(
        network=corpus.network,
        mode_model=train_mode_model(corpus),
        ensemble=ensemble,
        seg_params=segment.params_for_network(corpus.network),
    )


# --- attack ---------------------------------------------------------------------


def _stations_of(hyp: TraceHypothesis, network: MetroNetwork) -> list[str]:
    gids = [network.directed(u, hyp.direction) for u in hyp.interval_ids()]
    return [network.interval(gids[0]).from_station] + [
        network.interval(g).to_station for g in gids
    ]


def attack_trace(trace: Trace, model: AttackModel, mode: str = "full") -> dict:
    """Run extraction, segmentation, and inference over one raw trace."""
    if mode not in ("full", "reduced"):
        raise ValueError(f"unknown attack mode {mode!r}")
    series = coord.transform(trace)
    spans = extract_spans(series.hra, model.mode_model)

    results = []
    for span in spans:
        sub = series.view(span.start, span.end)
        points, warn = segment.find_final_segment_points(sub.hra, model.seg_params)
        entry = {
            "span": [int(span.start), int(span.end)],
            "t_start": float(series.t[span.start]),
            "t_end": float(series.t[span.end - 1]),
            "warning": bool(warn),
        }
        try:
            if mode == "full":
                res = infer_with_segment_tolerance(
                    sub, model.ensemble, model.network, points=points
                )
                hyp, used = res.best, res.points
            else:
                comp = sub.components()
                bounds = [0, *points, sub.n_samples]
                feats = [
                    extract_features(comp[a:b], model.ensemble.config)
                    for a, b in zip(bounds[:-1], bounds[1:])
                ]
                hyp = infer_trace(model.ensemble.predict_matrix(feats))
                used = tuple(points)
        except ValueError as exc:
            entry["error"] = str(exc)
            results.append(entry)
            continue
        entry.update(
            {
                "points": [int(p) for p in used],
                "start_interval": hyp.start_interval,
                "direction": hyp.direction,
                "length": hyp.length,
                "score": hyp.score,
                "intervals": list(hyp.interval_ids()),
                "stations": _stations_of(hyp, model.network),
            }
        )
        results.append(entry)

    return {
        "device_id": trace.device_id,
        "mode": mode,
        "num_spans": len(results),
        "spans": results,
    }


# --- seed traversals for bootstrapping -------------------------------------------


def seed_segments(
    network: MetroNetwork,
    profiles: list[TrackProfile],
    uid: int,
    direction: str,
    count: int,
    noise: NoiseConfig,
    seed: int,
) -> list[np.ndarray]:
    """Earth-frame segments of single-interval rides the attacker took.

    Each recording keeps a random slice of platform stillness on both sides,
    so the detector built on these tolerates however much dwell a segmenter
    cut leaves attached to a ride.
    """
    gid = network.directed(uid, direction)
    out = []
    for i in range(count):
        pad_rng = np.random.default_rng(child_seed(seed, 4, gid, i, 1))
        pad_l, pad_r = pad_rng.uniform(0.0, network.dwell_nominal, size=2)
        day = gen_mixed_day(
            [
                ("static", max(pad_l, 1.0)),
                ("trip", {"start_interval": gid, "length": 1}),
                ("static", max(pad_r, 1.0)),
            ],
            noise,
            child_seed(seed, 4, gid, i),
            network=network,
            profiles=profiles,
        )
        series = coord.transform(day)
        metro = next(r for r in day.truth if r.label == "metro")
        lo = int(np.searchsorted(day.t, metro.start - pad_l))
        hi = int(np.searchsorted(day.t, metro.end + pad_r))
        out.append(series.components()[lo:hi])
    return out
