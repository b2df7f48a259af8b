"""Shared fixtures: one small corpus reused across the unit tests.

The full-size benchmark lives in test_acceptance.py with its own
session fixtures; everything else runs on this six-interval line.
"""

from __future__ import annotations

import pytest

from subtrace.pipeline import Corpus, PipelineConfig, build_corpus


@pytest.fixture(scope="session")
def small_config() -> PipelineConfig:
    return PipelineConfig(
        seed=11,
        num_intervals=6,
        n_trips=8,
        mode_duration=400.0,
        boost_rounds=4,
        n_trees=12,
        enough_labels=6,
    )


@pytest.fixture(scope="session")
def small_corpus(small_config) -> Corpus:
    return build_corpus(small_config)
