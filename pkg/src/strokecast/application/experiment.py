"""Experiment harness (application layer).

Reproduces the train/test protocol end to end: pick balanced disjoint
writer subsets, train four codebooks per word from the training writers,
classify every test writer per word and on all words fused, for each
channel, and aggregate the rates of several trials into rate tables with
significance flags.

Like the rest of the application layer this module never prints and never
draws progress bars; callers pass a ``progress`` callback instead.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from strokecast.classifier import (
    ClassificationResult,
    WriterScores,
    decide,
    score_writer,
)
from strokecast.common.serialization import config_digest
from strokecast.constants import (
    ConfigError,
    InsufficientDataError,
    InvariantError,
    UndefinedCorrelationError,
)
from strokecast.domain.value_objects import Channel, Dataset, Gender, SessionFusion
from strokecast.gender_model import SomConfig, build_model_set, derive_seed
from strokecast.infrastructure.settings import (
    STROKECAST_MIN_POINTS,
    STROKECAST_P_THRESHOLD,
    STROKECAST_RESAMPLE_POINTS,
    STROKECAST_WORKERS,
)
from strokecast.stats import BinomialReport, binomial_report, min_significant_rate, pearson
from strokecast.stroke_pipeline import FeatureBank, extract_features
from strokecast.svc_io import load_dataset
from strokecast.synth import SynthConfig, generate_dataset

_logger = logging.getLogger(__name__)

__all__: list[str] = [
    "ALL_WORDS",
    "ONE_WORD_AVERAGE",
    "ExperimentConfig",
    "ExperimentResult",
    "RateTable",
    "Split",
    "TrialResult",
    "load_data",
    "load_experiment_config",
    "run_experiment",
    "run_resubstitution",
    "run_trial",
    "split_writers",
]

ALL_WORDS = "ALL WORDS"
ONE_WORD_AVERAGE = "ONE WORD ONLY (AVERAGE)"

ProgressCallback = Callable[[str], None]


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines an experiment run.

    Exactly one data source is used: ``data_root`` (an SVC tree, with an
    optional ``manifest``) or ``synth`` (generated on the fly).
    ``test_per_gender=None`` keeps every writer left after training and
    randomly discards the surplus of the larger gender.
    """

    data_root: str | None = None
    manifest: str | None = None
    synth: SynthConfig | None = None
    train_per_gender: int = 50
    test_per_gender: int | None = 121
    trials: int = 4
    channels: tuple[Channel, ...] = (Channel.DOWN_ONLY, Channel.UP_ONLY, Channel.COMBINED)
    strategy: SessionFusion = SessionFusion.SUM
    words: tuple[str, ...] | None = None
    resample_points: int = STROKECAST_RESAMPLE_POINTS
    min_points: int = STROKECAST_MIN_POINTS
    som: SomConfig = field(default_factory=SomConfig)
    p_threshold: float = STROKECAST_P_THRESHOLD
    seed: int | None = None
    workers: int = STROKECAST_WORKERS

    def __post_init__(self) -> None:
        object.__setattr__(self, "channels", tuple(Channel(c) for c in self.channels))
        object.__setattr__(self, "strategy", SessionFusion(self.strategy))
        if self.words is not None:
            object.__setattr__(self, "words", tuple(str(w) for w in self.words))
            if not self.words:
                raise ConfigError("words must not be empty")
        if self.data_root is not None and self.synth is not None:
            raise ConfigError("give either data_root or synth, not both")
        if self.train_per_gender < 1:
            raise ConfigError("train_per_gender must be >= 1")
        if self.test_per_gender is not None and self.test_per_gender < 1:
            raise ConfigError("test_per_gender must be >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.channels:
            raise ConfigError("at least one channel is required")
        if self.resample_points < 2:
            raise ConfigError("resample_points must be >= 2")
        if self.min_points < 2:
            raise ConfigError("min_points must be >= 2")
        if not 0.0 < self.p_threshold < 1.0:
            raise ConfigError("p_threshold must lie in (0, 1)")
        if self.seed is not None and self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "data_root": self.data_root,
            "manifest": self.manifest,
            "synth": self.synth.to_dict() if self.synth else None,
            "train_per_gender": self.train_per_gender,
            "test_per_gender": self.test_per_gender,
            "trials": self.trials,
            "channels": [c.value for c in self.channels],
            "strategy": self.strategy.value,
            "words": list(self.words) if self.words is not None else None,
            "resample_points": self.resample_points,
            "min_points": self.min_points,
            "som": self.som.to_dict(),
            "p_threshold": self.p_threshold,
            "seed": self.seed,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ExperimentConfig:
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
        kwargs = {k: v for k, v in data.items() if v is not None}
        try:
            if "synth" in kwargs:
                kwargs["synth"] = SynthConfig.from_dict(kwargs["synth"])
            if "som" in kwargs:
                kwargs["som"] = SomConfig.from_dict(kwargs["som"])
            if "channels" in kwargs:
                kwargs["channels"] = tuple(Channel(c) for c in kwargs["channels"])
            if "strategy" in kwargs:
                kwargs["strategy"] = SessionFusion(kwargs["strategy"])
            if "words" in kwargs:
                kwargs["words"] = tuple(kwargs["words"])
            if "test_per_gender" not in kwargs and "test_per_gender" in data:
                kwargs["test_per_gender"] = None
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid experiment config: {exc}") from exc

    def digest(self) -> str:
        """Hash of every field except ``workers``, which never changes results."""
        data = self.to_dict()
        data.pop("workers")
        return config_digest(data)


def load_experiment_config(
    path: str | Path | None = None, overrides: Mapping[str, Any] | None = None
) -> ExperimentConfig:
    """Read a JSON config file and apply non-``None`` overrides.

    Relative ``data_root`` and ``manifest`` paths in the file are resolved
    against the file's directory.

    Raises:
        ConfigError: On unreadable JSON, unknown keys or invalid values.
    """
    data: dict[str, Any] = {}
    if path is not None:
        fp = Path(path)
        try:
            loaded = json.loads(fp.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read experiment config {fp}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"experiment config {fp} is not a JSON object")
        data.update(loaded)
        for key in ("data_root", "manifest"):
            value = data.get(key)
            if value and not Path(value).is_absolute():
                data[key] = str(fp.parent / value)
    given = {k: v for k, v in (overrides or {}).items() if v is not None}
    # a data source given as an override replaces the one in the file
    if "data_root" in given:
        data.pop("synth", None)
    elif "synth" in given:
        data.pop("data_root", None)
        data.pop("manifest", None)
    data.update(given)
    return ExperimentConfig.from_dict(data)


# ---------------------------------------------------------------------------
# Data and splits
# ---------------------------------------------------------------------------


def load_data(cfg: ExperimentConfig) -> Dataset:
    """Load the SVC tree or generate the synthetic dataset of ``cfg``."""
    if cfg.synth is not None:
        return generate_dataset(cfg.synth, workers=cfg.workers)
    if cfg.data_root is None:
        raise ConfigError("experiment needs data_root or synth")
    return load_dataset(cfg.data_root, cfg.manifest, workers=cfg.workers)


@dataclass(frozen=True)
class Split:
    """Disjoint training and test writers of one trial."""

    train: tuple[str, ...]
    test: tuple[str, ...]


def split_writers(
    ds: Dataset,
    train_per_gender: int,
    test_per_gender: int | None,
    seed: int,
) -> Split:
    """Draw a seeded, gender-balanced, disjoint train/test split.

    Writers are shuffled per gender; the first ``train_per_gender`` train,
    the next ``test_per_gender`` test and the rest are discarded.

    Raises:
        InsufficientDataError: If a gender has too few writers.
        InvariantError: If the two sets overlap.
    """
    rng = np.random.default_rng(seed)
    shuffled: dict[Gender, list[str]] = {}
    for gender in Gender:
        pool = ds.writers_of(gender)
        shuffled[gender] = [pool[i] for i in rng.permutation(len(pool)).tolist()]
    left = min(len(w) for w in shuffled.values()) - train_per_gender
    n_test = left if test_per_gender is None else test_per_gender
    if n_test < 1 or left < n_test:
        counts = {g.value: len(w) for g, w in shuffled.items()}
        raise InsufficientDataError(
            f"need {train_per_gender} training and {test_per_gender or 1} test writers "
            f"per gender, dataset has {counts}"
        )
    train = sorted(w for g in Gender for w in shuffled[g][:train_per_gender])
    test = sorted(
        w for g in Gender for w in shuffled[g][train_per_gender : train_per_gender + n_test]
    )
    if set(train) & set(test):
        raise InvariantError("train and test writers overlap")
    return Split(tuple(train), tuple(test))


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrialResult:
    """Decisions of one trial keyed by ``(channel, word or ALL_WORDS)``."""

    trial: int
    seed: int
    split: Split
    words: tuple[str, ...]
    results: Mapping[tuple[Channel, str], tuple[ClassificationResult, ...]] = field(repr=False)

    def rate(self, channel: Channel, row: str) -> float:
        items = self.results[(channel, row)]
        return sum(r.correct for r in items) / len(items)

    def report(self, channel: Channel, row: str, p_threshold: float) -> BinomialReport:
        items = self.results[(channel, row)]
        return binomial_report(len(items), sum(r.correct for r in items), p_threshold)


def _decide_or_tie(scores: WriterScores, channel: Channel, words: Sequence[str]) -> ClassificationResult:
    try:
        return decide(scores, channel, words)
    except InsufficientDataError:
        # a word without strokes of this channel cannot vote either way
        _logger.debug("no %s evidence for %s on %s", channel.value, scores.writer_id, words)
        return ClassificationResult.from_scores(
            scores.writer_id, channel, words, 0.0, 0.0, scores.true_gender
        )


def _resolve_words(cfg: ExperimentConfig, ds: Dataset) -> tuple[str, ...]:
    available = ds.words()
    words = cfg.words if cfg.words is not None else tuple(available)
    missing = [w for w in words if w not in available]
    if missing:
        raise InsufficientDataError(f"words missing from dataset: {missing}")
    if not words:
        raise InsufficientDataError("dataset has no words")
    return tuple(words)


def run_trial(
    cfg: ExperimentConfig,
    trial_seed: int,
    ds: Dataset | None = None,
    bank: FeatureBank | None = None,
    *,
    trial: int = 0,
    progress: ProgressCallback | None = None,
) -> TrialResult:
    """Split, train and classify once.

    The same training writers build the models of every word. Each test
    writer is scored once; per-word and all-words decisions for every
    channel are derived from that single score table.
    """
    ds = ds if ds is not None else load_data(cfg)
    words = _resolve_words(cfg, ds)
    split = split_writers(ds, cfg.train_per_gender, cfg.test_per_gender, trial_seed)
    _logger.info(
        "Trial %d: %d training and %d test writers", trial, len(split.train), len(split.test)
    )

    models = build_model_set(
        ds.subset(split.train),
        words,
        cfg.resample_points,
        cfg.som,
        trial_seed,
        min_points=cfg.min_points,
        bank=bank,
        workers=cfg.workers,
    )

    def _score(writer_id: str) -> WriterScores:
        scores = score_writer(
            models,
            ds,
            writer_id,
            words,
            cfg.strategy,
            bank=bank,
            min_points=cfg.min_points,
        )
        if progress is not None:
            progress(writer_id)
        return scores

    with ThreadPoolExecutor(max_workers=cfg.workers) as executor:
        all_scores = list(executor.map(_score, split.test))

    results: dict[tuple[Channel, str], list[ClassificationResult]] = {}
    for scores in all_scores:
        for channel in cfg.channels:
            for word in words:
                results.setdefault((channel, word), []).append(
                    _decide_or_tie(scores, channel, (word,))
                )
            results.setdefault((channel, ALL_WORDS), []).append(
                _decide_or_tie(scores, channel, words)
            )
    return TrialResult(
        trial=trial,
        seed=trial_seed,
        split=split,
        words=words,
        results={key: tuple(items) for key, items in results.items()},
    )


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RateTable:
    """Rates of one channel: one row per word plus the summary rows.

    ``rates[i, t]`` is the rate of row ``i`` in trial ``t``. A cell is
    significant when ``rate * n >= k_min``; the AVG column uses the same
    rule on the averaged rate.
    """

    channel: Channel
    rows: tuple[str, ...]
    rates: np.ndarray = field(repr=False)
    n: int
    k_min: int
    r_min: float

    @property
    def trials(self) -> int:
        return int(self.rates.shape[1])

    @property
    def average(self) -> np.ndarray:
        return self.rates.mean(axis=1)

    def significant(self, rate: float | np.ndarray) -> bool | np.ndarray:
        flags = np.asarray(rate) * self.n >= self.k_min - 1e-9
        return bool(flags) if flags.ndim == 0 else flags

    def row(self, label: str) -> np.ndarray:
        return self.rates[self.rows.index(label)]

    def to_frame(self) -> pd.DataFrame:
        """Rates with trial columns ``TRIAL 1..T`` and an ``AVG`` column."""
        columns = [f"TRIAL {t + 1}" for t in range(self.trials)]
        frame = pd.DataFrame(self.rates, index=list(self.rows), columns=columns)
        frame["AVG"] = self.average
        frame.index.name = "word"
        return frame

    def significance_frame(self) -> pd.DataFrame:
        frame = self.to_frame()
        return frame.apply(lambda col: col * self.n >= self.k_min - 1e-9)


@dataclass(frozen=True)
class ExperimentResult:
    """All trials of a run plus the derived tables."""

    config: ExperimentConfig
    trials: tuple[TrialResult, ...]
    tables: Mapping[Channel, RateTable]
    word_lengths: Mapping[str, int]
    dropped_runs: int = 0

    @property
    def words(self) -> tuple[str, ...]:
        return self.trials[0].words

    def reports(self) -> list[dict[str, Any]]:
        """One BinomialReport row per channel, table row and trial."""
        rows: list[dict[str, Any]] = []
        for channel in self.config.channels:
            for label in (*self.words, ALL_WORDS):
                for trial in self.trials:
                    report = trial.report(channel, label, self.config.p_threshold)
                    rows.append(
                        {"channel": channel.value, "words": label, "trial": trial.trial + 1}
                        | report.to_row()
                    )
        return rows

    def fused_report(self, channel: Channel = Channel.COMBINED) -> BinomialReport:
        """All-words decisions of ``channel`` pooled over every trial."""
        items = [r for t in self.trials for r in t.results[(channel, ALL_WORDS)]]
        return binomial_report(
            len(items), sum(r.correct for r in items), self.config.p_threshold
        )

    def classifications(self) -> list[dict[str, Any]]:
        return [
            {"trial": trial.trial + 1} | result.to_row()
            for trial in self.trials
            for key in sorted(trial.results, key=lambda k: (k[0].value, k[1]))
            for result in trial.results[key]
        ]

    def word_length_correlation(self) -> dict[str, float | None]:
        """Pearson correlation of word length and per-word average rate."""
        out: dict[str, float | None] = {}
        lengths = [self.word_lengths[w] for w in self.words]
        for channel, table in self.tables.items():
            averages = [float(table.row(w).mean()) for w in self.words]
            try:
                out[channel.value] = pearson(lengths, averages)
            except (UndefinedCorrelationError, ValueError):
                out[channel.value] = None
        return out

    def summary(self) -> dict[str, Any]:
        first = next(iter(self.tables.values()))
        return {
            "config_digest": self.config.digest(),
            "seed": self.config.seed,
            "trials": len(self.trials),
            "train_writers": len(self.trials[0].split.train),
            "test_writers": first.n,
            "p_threshold": self.config.p_threshold,
            "k_min": first.k_min,
            "r_min": first.r_min,
            "dropped_runs": self.dropped_runs,
            "channels": {
                channel.value: {
                    "all_words_average": float(table.row(ALL_WORDS).mean()),
                    "one_word_average": float(table.row(ONE_WORD_AVERAGE).mean()),
                    "all_words_significant": table.significant(
                        float(table.row(ALL_WORDS).mean())
                    ),
                }
                for channel, table in self.tables.items()
            },
            "word_length_correlation": self.word_length_correlation(),
        }


def _rate_table(channel: Channel, trials: Sequence[TrialResult], p_threshold: float) -> RateTable:
    words = trials[0].words
    word_rates = np.array([[t.rate(channel, w) for t in trials] for w in words])
    fused = np.array([t.rate(channel, ALL_WORDS) for t in trials])
    rates = np.vstack((word_rates, word_rates.mean(axis=0), fused))
    n = len(trials[0].split.test)
    k_min, r_min = min_significant_rate(n, p_threshold)
    return RateTable(
        channel=channel,
        rows=(*words, ONE_WORD_AVERAGE, ALL_WORDS),
        rates=rates,
        n=n,
        k_min=k_min,
        r_min=r_min,
    )


def run_experiment(
    cfg: ExperimentConfig,
    *,
    ds: Dataset | None = None,
    progress: ProgressCallback | None = None,
) -> ExperimentResult:
    """Run every trial of ``cfg`` and build one rate table per channel.

    Trial seeds derive from ``cfg.seed``; features are extracted once and
    shared by all trials.

    Raises:
        ConfigError: If ``cfg.seed`` is missing.
    """
    if cfg.seed is None:
        raise ConfigError("an experiment needs an explicit seed")
    ds = ds if ds is not None else load_data(cfg)
    words = _resolve_words(cfg, ds)
    bank = extract_features(ds, cfg.resample_points, cfg.min_points, workers=cfg.workers)

    trials = tuple(
        run_trial(
            cfg,
            derive_seed(cfg.seed, "trial", t),
            ds,
            bank,
            trial=t,
            progress=progress,
        )
        for t in range(cfg.trials)
    )
    tables = {channel: _rate_table(channel, trials, cfg.p_threshold) for channel in cfg.channels}
    lengths = cfg.synth.word_lengths if cfg.synth is not None else {}
    result = ExperimentResult(
        config=cfg,
        trials=trials,
        tables=tables,
        word_lengths={w: lengths.get(w, len(w)) for w in words},
        dropped_runs=bank.dropped_runs,
    )
    for channel, table in tables.items():
        _logger.info(
            "%s: all-words average %.3f (one word %.3f)",
            channel.value,
            float(table.row(ALL_WORDS).mean()),
            float(table.row(ONE_WORD_AVERAGE).mean()),
        )
    return result



def run_resubstitution(
    cfg: ExperimentConfig,
    *,
    ds: Dataset | None = None,
    channel: Channel = Channel.COMBINED,
) -> BinomialReport:
    """Train on every writer and classify those same writers.

    Used where no disjoint split exists, such as one writer per gender. The
    rate is optimistic and ``n`` is the number of writers, so with two
    writers the report is never significant.

    Raises:
        ConfigError: If ``cfg.seed`` is missing.
        InsufficientDataError: If a gender has no writers.
    """
    if cfg.seed is None:
        raise ConfigError("an experiment needs an explicit seed")
    ds = ds if ds is not None else load_data(cfg)
    words = _resolve_words(cfg, ds)
    if any(not ds.writers_of(g) for g in Gender):
        raise InsufficientDataError("resubstitution needs at least one writer per gender")
    bank = extract_features(ds, cfg.resample_points, cfg.min_points, workers=cfg.workers)
    models = build_model_set(
        ds,
        words,
        cfg.resample_points,
        cfg.som,
        derive_seed(cfg.seed, "trial", 0),
        min_points=cfg.min_points,
        bank=bank,
        workers=cfg.workers,
    )
    results = [
        _decide_or_tie(
            score_writer(
                models, ds, writer_id, words, cfg.strategy, bank=bank, min_points=cfg.min_points
            ),
            channel,
            words,
        )
        for writer_id in sorted(ds.writers)
    ]
    report = binomial_report(len(results), sum(r.correct for r in results), cfg.p_threshold)
    _logger.warning(
        "Resubstitution on %d writers: %s accuracy %.3f is optimistic",
        report.n,
        channel.value,
        report.rate,
    )
    return report
