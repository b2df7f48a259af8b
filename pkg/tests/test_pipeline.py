"""Corpus round-trips, attack-model bundling, and the end-to-end attack."""

from __future__ import annotations

import numpy as np
import pytest

from subtrace.model import Trace, TraceFormatError
from subtrace.pipeline import (
    AttackModel,
    PipelineConfig,
    attack_trace,
    child_seed,
    interval_training_rows,
    load_corpus,
    mode_window_size,
    seed_segments,
    train_attack_model,
    train_mode_model,
    true_segments,
    true_trip_layout,
    write_corpus,
)
from subtrace.segment import params_for_network
from subtrace.simgen import gen_mixed_day, gen_other_mode


@pytest.fixture(scope="module")
def attack_model(small_corpus, small_config) -> AttackModel:
    return train_attack_model(small_corpus, small_config)


class TestConfig:
    def test_dict_round_trip(self, small_config):
        assert PipelineConfig.from_dict(small_config.to_dict()) == small_config

    def test_unknown_key_rejected(self, small_config):
        doc = small_config.to_dict()
        doc["typo"] = 1
        with pytest.raises(ValueError):
            PipelineConfig.from_dict(doc)

    def test_unknown_noise_key_rejected(self, small_config):
        doc = small_config.to_dict()
        doc["noise"]["typo"] = 1
        with pytest.raises(ValueError):
            PipelineConfig.from_dict(doc)

    def test_child_seed_stability(self):
        assert child_seed(7, 1, 2) == child_seed(7, 1, 2)
        assert child_seed(7, 1, 2) != child_seed(7, 1, 3)
        assert child_seed(7, 1, 2) != child_seed(8, 1, 2)


class TestCorpusRoundTrip:
    def test_write_then_load(self, small_corpus, tmp_path):
        write_corpus(small_corpus, tmp_path)
        back = load_corpus(tmp_path)
        assert back.network == small_corpus.network
        assert back.profiles == small_corpus.profiles
        assert back.manifest == small_corpus.manifest
        assert len(back.trips) == len(small_corpus.trips)
        assert len(back.modes) == len(small_corpus.modes)
        for a, b in zip(small_corpus.trips, back.trips):
            assert np.array_equal(a.t, b.t)
            assert np.array_equal(a.acc, b.acc)
            assert np.array_equal(a.orient, b.orient)
            assert a.truth == b.truth

    def test_not_a_corpus_dir(self, tmp_path):
        with pytest.raises(TraceFormatError):
            load_corpus(tmp_path)

    def test_trip_meta(self, small_corpus):
        meta = small_corpus.trip_meta
        assert len(meta) == len(small_corpus.trips)
        assert meta[0]["direction"] == "forward"
        assert meta[1]["direction"] == "reverse"


class TestTrueTripLayout:
    def test_forward_trip(self, small_corpus):
        layout = true_trip_layout(small_corpus.trips[0])
        k = small_corpus.network.num_intervals
        assert layout.uids == tuple(range(k))
        assert layout.direction == "forward"
        assert len(layout.cuts) == k - 1
        assert layout.span[0] == 0
        assert list(layout.cuts) == sorted(layout.cuts)
        assert all(layout.span[0] < c < layout.span[1] for c in layout.cuts)

    def test_reverse_trip(self, small_corpus):
        layout = true_trip_layout(small_corpus.trips[1])
        k = small_corpus.network.num_intervals
        assert layout.uids == tuple(range(k - 1, -1, -1))
        assert layout.direction == "reverse"

    def test_cut_times_are_dwell_centers(self, small_corpus):
        trip = small_corpus.trips[0]
        layout = true_trip_layout(trip)
        dwells = sorted(trip.truth_ranges("dwell"), key=lambda r: r.start)
        want = tuple(0.5 * (d.start + d.end) for d in dwells)
        assert layout.cut_times == pytest.approx(want)

    def test_true_segments_partition_span(self, small_corpus):
        trip = small_corpus.trips[0]
        layout = true_trip_layout(trip)
        segs = true_segments(trip)
        assert [uid for _, uid in segs] == list(layout.uids)
        assert all(seg.shape[1] == 3 for seg, _ in segs)
        total = sum(len(seg) for seg, _ in segs)
        assert total == layout.span[1] - layout.span[0]

    def test_non_trip_rejected(self, small_config):
        walk = gen_other_mode("walk", 60.0, small_config.noise, seed=3)
        with pytest.raises(ValueError):
            true_trip_layout(walk)

    def test_metro_without_intervals_rejected(self, small_corpus):
        trip = small_corpus.trips[0]
        bare = Trace(
            device_id=trip.device_id,
            sample_rate=trip.sample_rate,
            t=trip.t,
            acc=trip.acc,
            orient=trip.orient,
            truth=tuple(trip.truth_ranges("metro")),
        )
        with pytest.raises(ValueError):
            true_trip_layout(bare)

    def test_training_rows_cover_all_trips(self, small_corpus):
        segments, uids = interval_training_rows(small_corpus)
        k = small_corpus.network.num_intervals
        assert len(segments) == len(uids) == len(small_corpus.trips) * k
        assert set(uids) == set(range(k))
        sub, sub_uids = interval_training_rows(small_corpus, trip_idx=[0])
        assert len(sub) == k
        assert sub_uids == list(range(k))


class TestModeModel:
    def test_window_and_thresholds(self, small_corpus):
        model = train_mode_model(small_corpus)
        assert model.window == mode_window_size(small_corpus.network)
        ta, tb, tc = model.thresholds
        assert 0 < ta < tb < tc

    def test_separates_trips_from_static(self, small_corpus, attack_model):
        from subtrace.coord import transform
        from subtrace.extract import classify_windows

        model = attack_model.mode_model
        trip_labels, _ = classify_windows(transform(small_corpus.trips[0]).hra, model)
        static = next(m for m in small_corpus.modes if m.device_id.startswith("sim-static"))
        static_labels, _ = classify_windows(transform(static).hra, model)
        assert np.mean(trip_labels) > 0.9
        assert not np.any(static_labels)


class TestAttackModel:
    def test_save_load_round_trip(self, attack_model, tmp_path):
        path = tmp_path / "model.json"
        attack_model.save(path)
        back = AttackModel.load(path)
        assert back.to_dict() == attack_model.to_dict()

    def test_seg_params_follow_network(self, attack_model, small_corpus):
        assert attack_model.seg_params == params_for_network(small_corpus.network)

    def test_foreign_document_rejected(self, attack_model):
        doc = attack_model.to_dict()
        doc["kind"] = "other"
        with pytest.raises(ValueError):
            AttackModel.from_dict(doc)


class TestAttackTrace:
    def test_full_mode_recovers_trips(self, small_corpus, attack_model):
        k = small_corpus.network.num_intervals
        for trip in small_corpus.trips[:4]:
            layout = true_trip_layout(trip)
            report = attack_trace(trip, attack_model, mode="full")
            assert report["num_spans"] == 1
            span = report["spans"][0]
            assert "error" not in span
            assert span["length"] == k
            assert span["direction"] == layout.direction
            assert tuple(span["intervals"]) == layout.uids
            assert len(span["stations"]) == k + 1

    def test_stations_follow_network_names(self, small_corpus, attack_model):
        trip = small_corpus.trips[0]
        report = attack_trace(trip, attack_model, mode="full")
        span = report["spans"][0]
        net = small_corpus.network
        gid0 = net.directed(span["intervals"][0], span["direction"])
        assert span["stations"][0] == net.interval(gid0).from_station

    def test_reduced_mode(self, small_corpus, attack_model):
        trip = small_corpus.trips[0]
        layout = true_trip_layout(trip)
        report = attack_trace(trip, attack_model, mode="reduced")
        assert report["mode"] == "reduced"
        span = report["spans"][0]
        assert "error" not in span
        assert tuple(span["intervals"]) == layout.uids

    def test_unknown_mode_rejected(self, small_corpus, attack_model):
        with pytest.raises(ValueError):
            attack_trace(small_corpus.trips[0], attack_model, mode="fast")

    def test_mixed_day_isolates_the_ride(self, small_corpus, small_config, attack_model):
        day = gen_mixed_day(
            [
                ("static", 90.0),
                ("trip", {"start_interval": 0, "length": 3}),
                ("static", 90.0),
            ],
            small_config.noise,
            seed=55,
            network=small_corpus.network,
            profiles=small_corpus.profiles,
        )
        metro = next(r for r in day.truth if r.label == "metro")
        report = attack_trace(day, attack_model, mode="full")
        assert report["num_spans"] == 1
        span = report["spans"][0]
        # the span must cover the whole ride; the boundary search works at
        # mode-window granularity, so it may bleed that far into stillness
        bleed = 3.0 * attack_model.mode_model.window / small_corpus.network.sample_rate
        assert metro.start - bleed <= span["t_start"] <= metro.start + 2.0
        assert metro.end - 2.0 <= span["t_end"] <= metro.end + bleed
        assert span["length"] == 3

    def test_walk_only_trace_yields_nothing(self, small_config, attack_model):
        walk = gen_other_mode("walk", 120.0, small_config.noise, seed=9)
        report = attack_trace(walk, attack_model, mode="full")
        assert report["num_spans"] == 0
        assert report["spans"] == []


class TestSeedSegments:
    def test_shapes_and_determinism(self, small_corpus, small_config):
        net = small_corpus.network
        segs = seed_segments(
            net, small_corpus.profiles, 2, "forward", 3, small_config.noise, seed=13
        )
        assert len(segs) == 3
        again = seed_segments(
            net, small_corpus.profiles, 2, "forward", 3, small_config.noise, seed=13
        )
        for a, b in zip(segs, again):
            assert a.shape[1] == 3
            assert np.array_equal(a, b)

    def test_padding_keeps_ride_inside(self, small_corpus, small_config):
        net = small_corpus.network
        iv = net.interval(net.directed(2, "forward"))
        segs = seed_segments(
            net, small_corpus.profiles, 2, "forward", 2, small_config.noise, seed=14
        )
        low = net.sample_rate * iv.min_duration
        high = net.sample_rate * (iv.max_duration + 2 * net.dwell_nominal) + 2
        for seg in segs:
            assert low <= len(seg) <= high
