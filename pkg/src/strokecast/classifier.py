"""Minimum-distortion gender decisions.

A test writer's strokes are quantized twice, once with the male codebook and
once with the female codebook of the same word and stroke kind. Each stroke
contributes the Euclidean distance to its best-matching prototype. Per word
and gender, session distortions are fused (sum by default), stroke channels
and words are added without weights, and the writer is attributed the gender
with the smaller total.

Scoring is split in two steps so that one pass over a writer's strokes
serves every channel and word subset:

* :func:`score_writer` computes fused distortions per (word, gender, kind).
* :func:`decide` turns those scores into a :class:`ClassificationResult`.
"""

from __future__ import annotations

import logging
import warnings
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from strokecast.constants import (
    DimensionMismatchError,
    EmptyEvidenceWarning,
    InsufficientDataError,
)
from strokecast.domain.value_objects import (
    Channel,
    Dataset,
    Decision,
    Gender,
    SessionFusion,
    StrokeKind,
)
from strokecast.gender_model import CELLS, Codebook, WordModel
from strokecast.infrastructure.settings import STROKECAST_MIN_POINTS
from strokecast.som import bmu_many
from strokecast.stroke_pipeline import FeatureBank, FeatureStroke, recording_features

_logger = logging.getLogger(__name__)

__all__: list[str] = [
    "CLASSIFICATION_COLUMNS",
    "ClassificationResult",
    "DistortionRecord",
    "WriterScores",
    "classify_writer",
    "combine_channels",
    "combine_words",
    "decide",
    "fuse_sessions",
    "score_writer",
    "word_distortion",
]

CLASSIFICATION_COLUMNS: tuple[str, ...] = (
    "writer_id",
    "channel",
    "words",
    "male_score",
    "female_score",
    "decision",
    "true_gender",
)


# ---------------------------------------------------------------------------
# Result types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DistortionRecord:
    """Distortion of one session of one word against one codebook."""

    writer_id: str
    word_id: str
    session_id: int
    gender: Gender
    kind: StrokeKind
    distortion: float
    stroke_count: int


@dataclass(frozen=True)
class ClassificationResult:
    """Scores and decision for one writer, channel and word set.

    ``decision`` is Male iff ``male_score < female_score``, Female iff the
    reverse, and Tie on exact equality.
    """

    writer_id: str
    channel: Channel
    words: tuple[str, ...]
    male_score: float
    female_score: float
    decision: Decision
    true_gender: Gender | None = None

    @classmethod
    def from_scores(
        cls,
        writer_id: str,
        channel: Channel,
        words: Iterable[str],
        male_score: float,
        female_score: float,
        true_gender: Gender | None = None,
    ) -> ClassificationResult:
        if male_score < female_score:
            decision = Decision.MALE
        elif female_score < male_score:
            decision = Decision.FEMALE
        else:
            decision = Decision.TIE
        return cls(
            writer_id,
            channel,
            tuple(words),
            float(male_score),
            float(female_score),
            decision,
            true_gender,
        )

    @property
    def correct(self) -> bool:
        """True when the decision names the true gender; ties never count."""
        if self.true_gender is None or self.decision is Decision.TIE:
            return False
        return self.decision is Decision.for_gender(self.true_gender)

    def to_row(self) -> dict[str, Any]:
        return {
            "writer_id": self.writer_id,
            "channel": self.channel.value,
            "words": ";".join(self.words),
            "male_score": self.male_score,
            "female_score": self.female_score,
            "decision": self.decision.value,
            "true_gender": self.true_gender.value if self.true_gender else "",
        }


# ---------------------------------------------------------------------------
# Reductions
# ---------------------------------------------------------------------------


def word_distortion(
    cb: Codebook,
    strokes: Sequence[FeatureStroke] | np.ndarray,
    *,
    warn: bool = True,
) -> float:
    """Sum of BMU distances of ``strokes`` in ``cb``.

    Args:
        cb: Codebook of one cell.
        strokes: FeatureStrokes of the codebook's kind, or an ``(n, M*F)``
            matrix of their vectors.
        warn: Emit :class:`EmptyEvidenceWarning` for an empty stroke list.

    Raises:
        DimensionMismatchError: On a stroke of another kind or dimension.
    """
    if isinstance(strokes, np.ndarray):
        vectors = strokes
    else:
        for fs in strokes:
            if fs.kind is not cb.kind:
                raise DimensionMismatchError(
                    f"{fs.kind.value} stroke scored against a {cb.kind.value} codebook"
                )
        vectors = (
            np.vstack([fs.vector for fs in strokes]) if strokes else np.empty((0, cb.dim))
        )
    if vectors.shape[0] == 0:
        if warn:
            warnings.warn(
                f"no {cb.kind.value} strokes for word {cb.word_id!r}; distortion is 0",
                EmptyEvidenceWarning,
                stacklevel=2,
            )
        return 0.0
    if vectors.ndim != 2 or vectors.shape[1] != cb.dim:
        raise DimensionMismatchError(
            f"stroke vectors of length {vectors.shape[-1]} do not fit codebook dimension {cb.dim}"
        )
    _, dist = bmu_many(cb.protos, vectors)
    return float(dist.sum())


def fuse_sessions(per_session: Sequence[float], strategy: SessionFusion = SessionFusion.SUM) -> float:
    """Reduce per-session distortions of one word.

    Examples:
        >>> fuse_sessions([2, 3, 4, 1]), fuse_sessions([2, 3, 4, 1], SessionFusion.MIN)
        (10.0, 1.0)
    """
    values = [float(v) for v in per_session]
    if not values:
        raise InsufficientDataError("cannot fuse an empty list of session distortions")
    strategy = SessionFusion(strategy)
    if strategy is SessionFusion.SUM:
        return float(sum(values))
    if strategy is SessionFusion.AVERAGE:
        return float(sum(values)) / len(values)
    if strategy is SessionFusion.MAX:
        return max(values)
    return min(values)


def combine_channels(down: float, up: float, weights: tuple[float, float] = (1.0, 1.0)) -> float:
    """Unweighted (by default) sum of pen-down and pen-up distortions."""
    if not (np.isfinite(down) and np.isfinite(up)) or down < 0 or up < 0:
        raise ValueError(f"channel distortions must be finite and >= 0, got {down}, {up}")
    w_down, w_up = weights
    if (w_down, w_up) == (1.0, 1.0):
        return float(down) + float(up)
    return w_down * float(down) + w_up * float(up)


def combine_words(per_word: Sequence[float]) -> float:
    """Unweighted sum of per-word distortions."""
    values = [float(v) for v in per_word]
    if not values:
        raise InsufficientDataError("cannot combine an empty list of word distortions")
    return float(sum(values))


# ---------------------------------------------------------------------------
# Writer scoring
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WriterScores:
    """Session-fused distortions of one writer.

    Attributes:
        scores: ``(word, gender, kind) -> fused distortion``.
        stroke_counts: ``(word, kind) -> strokes summed over sessions``.
        records: Per-session distortion records in (word, session) order.
    """

    writer_id: str
    true_gender: Gender | None
    strategy: SessionFusion
    words: tuple[str, ...]
    scores: Mapping[tuple[str, Gender, StrokeKind], float]
    stroke_counts: Mapping[tuple[str, StrokeKind], int]
    records: tuple[DistortionRecord, ...] = field(default=(), repr=False)


def score_writer(
    models: Mapping[str, WordModel],
    ds: Dataset,
    writer_id: str,
    words: Iterable[str] | None = None,
    strategy: SessionFusion = SessionFusion.SUM,
    *,
    bank: FeatureBank | None = None,
    min_points: int = STROKECAST_MIN_POINTS,
) -> WriterScores:
    """Distortions of every session of ``writer_id`` against every codebook.

    Raises:
        UnknownWriterError: If the writer is not in ``ds``.
        InsufficientDataError: If a requested word has no model or the writer
            has no recording of it.
    """
    true_gender = ds.gender_of(writer_id)
    word_list = tuple(words) if words is not None else tuple(models)
    strategy = SessionFusion(strategy)
    scores: dict[tuple[str, Gender, StrokeKind], float] = {}
    counts: dict[tuple[str, StrokeKind], int] = {}
    records: list[DistortionRecord] = []

    for word in word_list:
        model = models.get(word)
        if model is None:
            raise InsufficientDataError(f"no model for word {word!r}")
        sessions = ds.recordings_for(writer_id, word)
        if not sessions:
            raise InsufficientDataError(f"writer {writer_id!r} has no recording of word {word!r}")
        per_session: dict[tuple[Gender, StrokeKind], list[float]] = {}
        for session, rec in sessions:
            if bank is not None and bank.M == model.M and bank.min_points == min_points:
                feats = bank.get(writer_id, session, word)
            else:
                feats = recording_features(rec, model.M, min_points)
            for gender, kind in CELLS:
                cb = model.codebook(gender, kind)
                vectors = feats.of(kind)
                d = word_distortion(cb, vectors, warn=False)
                per_session.setdefault((gender, kind), []).append(d)
                records.append(
                    DistortionRecord(writer_id, word, session, gender, kind, d, vectors.shape[0])
                )
            for kind in StrokeKind:
                counts[(word, kind)] = counts.get((word, kind), 0) + feats.of(kind).shape[0]
        for (gender, kind), values in per_session.items():
            scores[(word, gender, kind)] = fuse_sessions(values, strategy)
        for kind in StrokeKind:
            if counts[(word, kind)] == 0:
                warnings.warn(
                    f"writer {writer_id!r} has no {kind.value} strokes for word {word!r}; "
                    "it contributes 0",
                    EmptyEvidenceWarning,
                    stacklevel=2,
                )
    return WriterScores(
        writer_id=writer_id,
        true_gender=true_gender,
        strategy=strategy,
        words=word_list,
        scores=scores,
        stroke_counts=counts,
        records=tuple(records),
    )


def decide(
    scores: WriterScores,
    channel: Channel,
    words: Iterable[str] | None = None,
    *,
    weights: tuple[float, float] = (1.0, 1.0),
) -> ClassificationResult:
    """Minimum-distortion decision for a channel and word subset.

    The combined channel is ``combine_channels(DownOnly, UpOnly)`` of the
    word-combined scores, so it decomposes exactly into the two single
    channels.

    Raises:
        InsufficientDataError: If none of the selected words has a stroke of
            the kinds the channel uses.
    """
    channel = Channel(channel)
    word_list = tuple(words) if words is not None else scores.words
    missing = [w for w in word_list if w not in scores.words]
    if missing:
        raise InsufficientDataError(f"writer {scores.writer_id!r} was not scored on {missing}")
    evidence = sum(scores.stroke_counts[(w, k)] for w in word_list for k in channel.kinds)
    if evidence == 0:
        raise InsufficientDataError(
            f"writer {scores.writer_id!r} has no {channel.value} strokes in {list(word_list)}"
        )

    totals: dict[Gender, float] = {}
    for gender in Gender:
        per_kind = {
            kind: combine_words([scores.scores[(w, gender, kind)] for w in word_list])
            for kind in channel.kinds
        }
        if channel is Channel.COMBINED:
            totals[gender] = combine_channels(
                per_kind[StrokeKind.PEN_DOWN], per_kind[StrokeKind.PEN_UP], weights
            )
        else:
            totals[gender] = per_kind[channel.kinds[0]]
    return ClassificationResult.from_scores(
        scores.writer_id,
        channel,
        word_list,
        totals[Gender.MALE],
        totals[Gender.FEMALE],
        scores.true_gender,
    )


def classify_writer(
    models: Mapping[str, WordModel],
    ds: Dataset,
    writer_id: str,
    channel: Channel = Channel.COMBINED,
    words: Iterable[str] | None = None,
    session_strategy: SessionFusion = SessionFusion.SUM,
    *,
    bank: FeatureBank | None = None,
    min_points: int = STROKECAST_MIN_POINTS,
    weights: tuple[float, float] = (1.0, 1.0),
) -> ClassificationResult:
    """Score a writer and decide in one call.

    Examples:
        A writer whose strokes coincide with the male prototypes scores 0
        against the male codebooks and is attributed ``Decision.MALE``.
    """
    word_list = tuple(words) if words is not None else None
    scores = score_writer(
        models, ds, writer_id, word_list, session_strategy, bank=bank, min_points=min_points
    )
    return decide(scores, channel, word_list, weights=weights)
