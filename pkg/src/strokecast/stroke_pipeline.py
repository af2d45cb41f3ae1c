"""Stroke segmentation and fixed-length feature extraction.

A recording is split into maximal runs of constant button status: runs with
``bs == 1`` are pen-down strokes, runs with ``bs == 0`` are pen-up strokes.
Each stroke keeps only its selected channels (x, y, pr for pen-down and x, y
for pen-up), is linearly resampled to ``M`` points uniformly in sample index,
z-normalized per channel (population standard deviation) and flattened
point-major into a feature vector of length ``M * F``.
"""

from __future__ import annotations

import logging
import warnings
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

from strokecast.constants import ConfigError, DroppedRunWarning
from strokecast.domain.value_objects import (
    PR,
    X,
    Y,
    Dataset,
    RecordingKey,
    StrokeKind,
    WordRecording,
)
from strokecast.infrastructure.settings import (
    STROKECAST_MIN_POINTS,
    STROKECAST_RESAMPLE_POINTS,
    STROKECAST_WORKERS,
)

_logger = logging.getLogger(__name__)

__all__: list[str] = [
    "FeatureBank",
    "FeatureStroke",
    "RecordingFeatures",
    "Segmentation",
    "Stroke",
    "dump_feature_strokes",
    "extract_features",
    "normalize",
    "recording_features",
    "resample",
    "segment",
    "selected_columns",
    "to_feature_stroke",
]

_SELECTED: dict[StrokeKind, tuple[int, ...]] = {
    StrokeKind.PEN_DOWN: (X, Y, PR),
    StrokeKind.PEN_UP: (X, Y),
}


def selected_columns(kind: StrokeKind) -> tuple[int, ...]:
    """Recording columns kept for a stroke kind."""
    return _SELECTED[kind]


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Stroke:
    """A maximal constant-button run of a recording.

    Attributes:
        kind: Pen-down or pen-up.
        points: ``(n, 7)`` read-only sample matrix, ``n >= 2``. Pen-up strokes
            carry zero pressure whatever the device reported.
        span: Inclusive ``(start, end)`` sample indices in the recording.
    """

    kind: StrokeKind
    points: np.ndarray = field(repr=False)
    span: tuple[int, int]

    def __len__(self) -> int:
        return int(self.points.shape[0])


@dataclass(frozen=True)
class Segmentation:
    """Strokes of one recording in temporal order plus the dropped runs."""

    pen_down: list[Stroke]
    pen_up: list[Stroke]
    dropped: list[tuple[int, int]]

    @property
    def dropped_count(self) -> int:
        return len(self.dropped)

    def strokes(self, kind: StrokeKind) -> list[Stroke]:
        return self.pen_down if kind is StrokeKind.PEN_DOWN else self.pen_up


@dataclass(frozen=True, eq=False)
class FeatureStroke:
    """Resampled, normalized, flattened stroke.

    ``vector`` has length ``M * F`` laid out point-major: the F features of
    point 0, then those of point 1, and so on.
    """

    kind: StrokeKind
    M: int
    F: int
    vector: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        vec = np.asarray(self.vector, dtype=np.float64).ravel().copy()
        if vec.size != self.M * self.F:
            raise ValueError(f"vector length {vec.size} != M*F = {self.M * self.F}")
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)

    def as_matrix(self) -> np.ndarray:
        """View the vector as ``(M, F)``: one row per resampled point."""
        return self.vector.reshape(self.M, self.F)


# ---------------------------------------------------------------------------
# Segmentation
# ---------------------------------------------------------------------------


def segment(recording: WordRecording, min_points: int = STROKECAST_MIN_POINTS) -> Segmentation:
    """Split a recording into maximal constant-button runs.

    Args:
        recording: Source recording.
        min_points: Shortest run kept as a stroke; shorter runs are dropped
            and listed in ``Segmentation.dropped``.

    Returns:
        Segmentation: Pen-down and pen-up strokes in temporal order. Kept
        spans plus dropped spans tile ``[0, N)`` exactly.

    Examples:
        >>> bs = [0, 0, 1, 1, 1, 0, 0, 1, 1, 0]
        >>> rec = WordRecording("w", [[0, 0, i, b, 0, 0, 0] for i, b in enumerate(bs)])
        >>> seg = segment(rec, 2)
        >>> [s.span for s in seg.pen_down], [s.span for s in seg.pen_up], seg.dropped
        ([(2, 4), (7, 8)], [(0, 1), (5, 6)], [(9, 9)])
    """
    if min_points < 2:
        raise ConfigError(f"min_points must be >= 2, got {min_points}")
    bs = recording.button_status
    n = bs.shape[0]
    cuts = np.flatnonzero(np.diff(bs)) + 1
    starts = np.concatenate(([0], cuts))
    ends = np.concatenate((cuts, [n])) - 1

    pen_down: list[Stroke] = []
    pen_up: list[Stroke] = []
    dropped: list[tuple[int, int]] = []
    for start, end in zip(starts.tolist(), ends.tolist(), strict=True):
        if end - start + 1 < min_points:
            dropped.append((start, end))
            continue
        points = recording.data[start : end + 1]
        if bs[start] == 1:
            pen_down.append(Stroke(StrokeKind.PEN_DOWN, points, (start, end)))
        else:
            if points[:, PR].any():
                points = points.copy()
                points[:, PR] = 0
                points.setflags(write=False)
            pen_up.append(Stroke(StrokeKind.PEN_UP, points, (start, end)))
    return Segmentation(pen_down, pen_up, dropped)


# ---------------------------------------------------------------------------
# Feature transforms
# ---------------------------------------------------------------------------


def resample(stroke: Stroke, M: int) -> np.ndarray:
    """Resample the selected channels of a stroke to ``M`` points.

    Output point ``j`` is the linear interpolation of every channel at
    ``j / (M - 1)`` along the normalized sample-index axis, so the first and
    last samples are reproduced exactly.

    Returns:
        np.ndarray: ``(M, F)`` float array.

    Raises:
        ConfigError: If ``M < 2``.
        ValueError: If the stroke has fewer than two points.
    """
    if M < 2:
        raise ConfigError(f"resample length M must be >= 2, got {M}")
    n = len(stroke)
    if n < 2:
        raise ValueError(f"stroke needs at least 2 points, got {n}")
    channels = stroke.points[:, list(_SELECTED[stroke.kind])].astype(np.float64)
    if n == M:
        return channels
    src = np.linspace(0.0, 1.0, n)
    dst = np.linspace(0.0, 1.0, M)
    return np.column_stack([np.interp(dst, src, channels[:, c]) for c in range(channels.shape[1])])


def normalize(channel: Sequence[float] | np.ndarray) -> np.ndarray:
    """Z-normalize one channel with the population standard deviation.

    A constant channel maps to all zeros.

    Examples:
        >>> normalize([1, 2, 3]).round(6).tolist()
        [-1.224745, 0.0, 1.224745]
        >>> normalize([5, 5, 5, 5]).tolist()
        [0.0, 0.0, 0.0, 0.0]
    """
    values = np.asarray(channel, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot normalize an empty channel")
    if np.ptp(values) == 0:
        return np.zeros_like(values)
    centred = values - values.mean()
    return centred / centred.std()


def to_feature_stroke(stroke: Stroke, M: int = STROKECAST_RESAMPLE_POINTS) -> FeatureStroke:
    """Resample, normalize each channel, and flatten point-major."""
    points = resample(stroke, M)
    normed = np.column_stack([normalize(points[:, c]) for c in range(points.shape[1])])
    return FeatureStroke(stroke.kind, M, points.shape[1], normed.ravel())


@dataclass(frozen=True)
class RecordingFeatures:
    """Feature matrices of one recording, one row per stroke."""

    pen_down: np.ndarray
    pen_up: np.ndarray
    dropped: int = 0

    def of(self, kind: StrokeKind) -> np.ndarray:
        return self.pen_down if kind is StrokeKind.PEN_DOWN else self.pen_up


def _stack(strokes: Iterable[Stroke], kind: StrokeKind, M: int) -> np.ndarray:
    rows = [to_feature_stroke(s, M).vector for s in strokes]
    if not rows:
        return np.empty((0, M * kind.feature_count), dtype=np.float64)
    return np.vstack(rows)


def recording_features(
    recording: WordRecording,
    M: int = STROKECAST_RESAMPLE_POINTS,
    min_points: int = STROKECAST_MIN_POINTS,
) -> RecordingFeatures:
    """Segment a recording and stack its FeatureStroke vectors per kind."""
    seg = segment(recording, min_points)
    return RecordingFeatures(
        pen_down=_stack(seg.pen_down, StrokeKind.PEN_DOWN, M),
        pen_up=_stack(seg.pen_up, StrokeKind.PEN_UP, M),
        dropped=seg.dropped_count,
    )


def dump_feature_strokes(strokes: Iterable[FeatureStroke]) -> str:
    """Debug dump: ``kind M F v0,v1,...`` per line, 9 significant digits."""
    lines = [
        f"{fs.kind.value} {fs.M} {fs.F} " + ",".join(f"{v:.9g}" for v in fs.vector.tolist())
        for fs in strokes
    ]
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# Dataset-level feature bank
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureBank:
    """Precomputed :class:`RecordingFeatures` for every recording of a dataset."""

    M: int
    min_points: int
    features: Mapping[RecordingKey, RecordingFeatures] = field(repr=False)

    def get(self, writer_id: str, session: int, word: str) -> RecordingFeatures:
        return self.features[(writer_id, session, word)]

    @property
    def dropped_runs(self) -> int:
        return sum(f.dropped for f in self.features.values())


def extract_features(
    ds: Dataset,
    M: int = STROKECAST_RESAMPLE_POINTS,
    min_points: int = STROKECAST_MIN_POINTS,
    *,
    workers: int = STROKECAST_WORKERS,
) -> FeatureBank:
    """Segment and featurize every recording of ``ds`` once.

    A single :class:`DroppedRunWarning` summarizes runs shorter than
    ``min_points`` across the whole dataset.
    """
    if M < 2:
        raise ConfigError(f"resample length M must be >= 2, got {M}")
    keys = sorted(ds.recordings)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        computed = list(
            executor.map(lambda k: recording_features(ds.recordings[k], M, min_points), keys)
        )
    bank = FeatureBank(M, min_points, MappingProxyType(dict(zip(keys, computed, strict=True))))
    if bank.dropped_runs:
        warnings.warn(
            f"dropped {bank.dropped_runs} runs shorter than {min_points} samples",
            DroppedRunWarning,
            stacklevel=2,
        )
    _logger.debug("Extracted features for %d recordings (M=%d)", len(keys), M)
    return bank
