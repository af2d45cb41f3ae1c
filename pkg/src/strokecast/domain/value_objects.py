"""strokecast.domain.value_objects

Value objects that belong to the *inner* domain layer: pen samples, word
recordings, labelled datasets and the small enumerations shared by every
other layer. Everything here is free of file I/O so that the business logic
stays trivially unit-testable.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Any

import numpy as np

from strokecast.constants import DataError, UnknownWriterError

__all__: list[str] = [
    "AL",
    "AZ",
    "BS",
    "PR",
    "SVC_FIELDS",
    "TS",
    "X",
    "Y",
    "Channel",
    "Dataset",
    "Decision",
    "Gender",
    "PenSample",
    "RecordingKey",
    "SessionFusion",
    "SkipReport",
    "StrokeKind",
    "TrainingMode",
    "WordRecording",
]

# Column order of one SVC line and of ``WordRecording.data``.
SVC_FIELDS: tuple[str, ...] = ("x", "y", "ts", "bs", "az", "al", "pr")
X, Y, TS, BS, AZ, AL, PR = range(7)

RecordingKey = tuple[str, int, str]


# ---------------------------------------------------------------------------
# Enumerations
# ---------------------------------------------------------------------------


class Gender(str, Enum):
    """Writer gender label as stored in manifests ("M" / "F")."""

    MALE = "M"
    FEMALE = "F"

    @classmethod
    def parse(cls, label: str) -> Gender:
        """Return the gender for a manifest label, raising ``ValueError`` otherwise."""
        return cls(label.strip().upper())


class StrokeKind(str, Enum):
    """Pen-down (on surface) or pen-up (in air) stroke."""

    PEN_DOWN = "down"
    PEN_UP = "up"

    @property
    def feature_count(self) -> int:
        """Selected channels: x, y, pr for pen-down and x, y for pen-up."""
        return 3 if self is StrokeKind.PEN_DOWN else 2

    @property
    def button_status(self) -> int:
        return 1 if self is StrokeKind.PEN_DOWN else 0


class Channel(str, Enum):
    """Which stroke kinds feed a classification decision."""

    DOWN_ONLY = "down"
    UP_ONLY = "up"
    COMBINED = "combined"

    @property
    def kinds(self) -> tuple[StrokeKind, ...]:
        if self is Channel.DOWN_ONLY:
            return (StrokeKind.PEN_DOWN,)
        if self is Channel.UP_ONLY:
            return (StrokeKind.PEN_UP,)
        return (StrokeKind.PEN_DOWN, StrokeKind.PEN_UP)


class SessionFusion(str, Enum):
    """Reduction applied to per-session distortions of one word."""

    SUM = "sum"
    AVERAGE = "average"
    MAX = "max"
    MIN = "min"


class Decision(str, Enum):
    """Outcome of a minimum-distortion decision."""

    MALE = "M"
    FEMALE = "F"
    TIE = "tie"

    @classmethod
    def for_gender(cls, gender: Gender) -> Decision:
        return cls.MALE if gender is Gender.MALE else cls.FEMALE


class TrainingMode(str, Enum):
    """SOM update rule."""

    BATCH = "batch"
    SEQUENTIAL = "sequential"


# ---------------------------------------------------------------------------
# Pen samples and recordings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PenSample:
    """One raw tablet sample: the seven SVC fields of a single line."""

    x: int
    y: int
    ts: int
    bs: int
    az: int
    al: int
    pr: int

    def __post_init__(self) -> None:
        if self.bs not in (0, 1):
            raise ValueError(f"button status must be 0 or 1, got {self.bs}")
        if self.pr < 0:
            raise ValueError(f"pressure must be >= 0, got {self.pr}")

    def as_tuple(self) -> tuple[int, int, int, int, int, int, int]:
        return (self.x, self.y, self.ts, self.bs, self.az, self.al, self.pr)


@dataclass(frozen=True, eq=False)
class WordRecording:
    """One execution of a word: an ``(N, 7)`` integer matrix of pen samples.

    Columns follow :data:`SVC_FIELDS`. The matrix is copied and made
    read-only on construction, so a recording can be shared between threads.

    Raises:
        DataError: If the matrix is empty, has the wrong shape, carries a
            button status outside {0, 1}, a negative pressure, or decreasing
            timestamps.
    """

    word_id: str
    data: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        arr = np.array(self.data, dtype=np.int64, copy=True)
        if arr.ndim != 2 or arr.shape[1] != len(SVC_FIELDS):
            raise DataError(
                f"recording {self.word_id!r}: expected an (N, 7) matrix, got shape {arr.shape}"
            )
        if arr.shape[0] < 1:
            raise DataError(f"recording {self.word_id!r}: needs at least one sample")
        if not np.isin(arr[:, BS], (0, 1)).all():
            raise DataError(f"recording {self.word_id!r}: button status outside {{0, 1}}")
        if (arr[:, PR] < 0).any():
            raise DataError(f"recording {self.word_id!r}: negative pressure")
        if (np.diff(arr[:, TS]) < 0).any():
            raise DataError(f"recording {self.word_id!r}: timestamps decrease")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_samples(cls, word_id: str, samples: Iterable[PenSample]) -> WordRecording:
        rows = [s.as_tuple() for s in samples]
        return cls(word_id, np.array(rows, dtype=np.int64).reshape(-1, len(SVC_FIELDS)))

    def __len__(self) -> int:
        return int(self.data.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WordRecording):
            return NotImplemented
        return self.word_id == other.word_id and np.array_equal(self.data, other.data)

    __hash__ = None  # type: ignore[assignment]

    @property
    def samples(self) -> Iterator[PenSample]:
        for row in self.data.tolist():
            yield PenSample(*row)

    @property
    def button_status(self) -> np.ndarray:
        return self.data[:, BS]


@dataclass(frozen=True)
class SkipReport:
    """A file that dataset loading could not use, and why."""

    path: str
    reason: str


# ---------------------------------------------------------------------------
# Dataset
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labelled writers and their recordings keyed by (writer, session, word).

    Both mappings are wrapped read-only on construction.

    Raises:
        DataError: If a recording belongs to a writer missing from ``writers``
            or a session id is not a positive integer.
    """

    writers: Mapping[str, Gender]
    recordings: Mapping[RecordingKey, WordRecording]
    skipped: tuple[SkipReport, ...] = ()
    _by_writer_word: dict[tuple[str, str], list[tuple[int, WordRecording]]] = field(
        init=False, repr=False, default_factory=dict
    )

    def __post_init__(self) -> None:
        writers = {str(w): Gender(g) for w, g in self.writers.items()}
        recordings = dict(self.recordings)
        for writer_id, session, word in recordings:
            if writer_id not in writers:
                raise DataError(f"recording for unknown writer {writer_id!r}")
            if session < 1:
                raise DataError(f"session ids start at 1, got {session} for {writer_id!r}")
            if recordings[(writer_id, session, word)].word_id != word:
                raise DataError(f"recording key word {word!r} does not match its content")
        object.__setattr__(self, "writers", MappingProxyType(writers))
        object.__setattr__(self, "recordings", MappingProxyType(recordings))
        object.__setattr__(self, "skipped", tuple(self.skipped))
        index: dict[tuple[str, str], list[tuple[int, WordRecording]]] = {}
        for (writer_id, session, word), rec in sorted(recordings.items()):
            index.setdefault((writer_id, word), []).append((session, rec))
        object.__setattr__(self, "_by_writer_word", index)

    def gender_of(self, writer_id: str) -> Gender:
        try:
            return self.writers[writer_id]
        except KeyError:
            raise UnknownWriterError(f"writer {writer_id!r} is not in the dataset") from None

    def writers_of(self, gender: Gender) -> list[str]:
        """Writer ids of one gender, sorted."""
        return sorted(w for w, g in self.writers.items() if g is gender)

    def words(self) -> list[str]:
        return sorted({word for _, _, word in self.recordings})

    def sessions(self) -> list[int]:
        return sorted({session for _, session, _ in self.recordings})

    def recordings_for(self, writer_id: str, word: str) -> list[tuple[int, WordRecording]]:
        """All ``(session, recording)`` pairs of a writer for a word, by session."""
        return list(self._by_writer_word.get((writer_id, word), ()))

    def subset(self, writer_ids: Iterable[str]) -> Dataset:
        """Restrict the dataset to the given writers (skip reports are dropped)."""
        keep = set(writer_ids)
        missing = keep.difference(self.writers)
        if missing:
            raise UnknownWriterError(f"writers not in dataset: {sorted(missing)}")
        return Dataset(
            writers={w: g for w, g in self.writers.items() if w in keep},
            recordings={k: r for k, r in self.recordings.items() if k[0] in keep},
        )

    def summary(self) -> dict[str, Any]:
        return {
            "writers": len(self.writers),
            "male": len(self.writers_of(Gender.MALE)),
            "female": len(self.writers_of(Gender.FEMALE)),
            "words": len(self.words()),
            "sessions": len(self.sessions()),
            "recordings": len(self.recordings),
            "skipped": len(self.skipped),
        }
