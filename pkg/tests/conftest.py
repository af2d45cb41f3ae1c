# Tests package -- conftest.py
"""Shared pytest configuration and fixtures for Strokecast tests."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import pytest

from strokecast.domain.value_objects import Dataset, Gender, WordRecording
from strokecast.gender_model import SomConfig, build_model_set
from strokecast.som import TrainingSchedule
from strokecast.synth import SynthConfig, generate_dataset

TINY_WORDS: tuple[tuple[str, int], ...] = (("ALFA", 3), ("BETA", 4))
SMALL_M = 8


def make_recording(
    word_id: str,
    bs: Sequence[int],
    *,
    pressure: int = 400,
    seed: int | None = None,
) -> WordRecording:
    """Build a recording from a button-status sequence.

    Coordinates walk diagonally (or randomly when ``seed`` is given) and the
    timestamp advances by 10 per sample. Pen-up samples carry zero pressure.
    """
    n = len(bs)
    if seed is None:
        xs = np.arange(n) * 10
        ys = np.arange(n) * 5
        prs = np.full(n, pressure)
    else:
        rng = np.random.default_rng(seed)
        xs = rng.integers(0, 2000, n)
        ys = rng.integers(0, 2000, n)
        prs = rng.integers(100, 900, n)
    rows = [
        [int(xs[i]), int(ys[i]), 10 * i, int(b), 0, 0, int(prs[i]) if b else 0]
        for i, b in enumerate(bs)
    ]
    return WordRecording(word_id, rows)


def make_dataset(
    genders: dict[str, Gender],
    words: Sequence[str] = ("ALFA",),
    sessions: int = 2,
    bs: Sequence[int] = (1, 1, 1, 1, 0, 0, 0, 1, 1, 1, 1, 1),
) -> Dataset:
    """Dataset where every writer wrote every word in every session."""
    recordings = {}
    for w_idx, writer_id in enumerate(sorted(genders)):
        for session in range(1, sessions + 1):
            for word in words:
                recordings[(writer_id, session, word)] = make_recording(
                    word, bs, seed=1000 * w_idx + 10 * session + len(word)
                )
    return Dataset(writers=genders, recordings=recordings)


@pytest.fixture(scope="session")
def tiny_synth_config() -> SynthConfig:
    return SynthConfig(
        words=TINY_WORDS,
        writers_per_gender=6,
        sessions=2,
        separation=8.0,
        seed=11,
    )


@pytest.fixture(scope="session")
def tiny_dataset(tiny_synth_config: SynthConfig) -> Dataset:
    return generate_dataset(tiny_synth_config, workers=2)


@pytest.fixture(scope="session")
def small_som() -> SomConfig:
    return SomConfig(
        target_units=16,
        schedule=TrainingSchedule(rough_epochs=5, fine_epochs=20),
    )


@pytest.fixture(scope="session")
def tiny_models(tiny_dataset: Dataset, small_som: SomConfig):
    return build_model_set(
        tiny_dataset, tiny_dataset.words(), SMALL_M, small_som, seed=3, workers=2
    )
