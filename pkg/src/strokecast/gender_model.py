"""Per-word gender codebooks: training, file format and model sets.

Every word gets four codebooks, one per (gender, stroke kind) cell. A codebook
is a SOM trained on every stroke of that kind produced by every training
writer of that gender, pooled over all sessions.

Codebook files are versioned text::

    STROKECAST-CB v1
    word: BIODEGRADABLE
    gender: M
    kind: down
    M: 16
    F: 3
    rows: 12
    cols: 12
    seed: 1234
    writers: 50
    strokes: 3600
    schedule: 3f0c2a9e51d7
    <one prototype per line, 17 significant digits>
    checksum: <sha256 of everything above>

A model set directory holds ``<word>/<gender>-<kind>.cb`` files, one
``<word>/index.json`` per word and a top-level ``models.json``.
"""

from __future__ import annotations

import hashlib
import json
import logging
from collections.abc import Callable, Iterable, Mapping
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Any

import numpy as np

from strokecast.common.serialization import config_digest, write_json
from strokecast.constants import (
    ConfigError,
    InsufficientDataError,
    InvariantError,
    ModelChecksumError,
    ModelFormatError,
    ModelTruncatedError,
    ModelVersionError,
)
from strokecast.domain.value_objects import Dataset, Gender, StrokeKind
from strokecast.infrastructure.settings import (
    STROKECAST_MIN_POINTS,
    STROKECAST_RESAMPLE_POINTS,
    STROKECAST_TARGET_UNITS,
    STROKECAST_WORKERS,
)
from strokecast.som import GridSpec, PrototypeSet, TrainingSchedule, plan_grid, train
from strokecast.stroke_pipeline import FeatureBank, recording_features

_logger = logging.getLogger(__name__)

__all__: list[str] = [
    "CELLS",
    "MAGIC",
    "Codebook",
    "Provenance",
    "SomConfig",
    "WordModel",
    "build_codebook",
    "build_model_set",
    "build_word_model",
    "codebook_from_text",
    "codebook_to_text",
    "derive_seed",
    "load_codebook",
    "load_model",
    "load_model_set",
    "read_model_index",
    "save_codebook",
    "save_model",
    "save_model_set",
]

MAGIC = "STROKECAST-CB v1"
MODEL_INDEX = "models.json"
WORD_INDEX = "index.json"

CELLS: tuple[tuple[Gender, StrokeKind], ...] = (
    (Gender.MALE, StrokeKind.PEN_DOWN),
    (Gender.MALE, StrokeKind.PEN_UP),
    (Gender.FEMALE, StrokeKind.PEN_DOWN),
    (Gender.FEMALE, StrokeKind.PEN_UP),
)


def derive_seed(seed: int, *tags: object) -> int:
    """Deterministic 63-bit seed from a parent seed and string-able tags."""
    text = ":".join([str(seed), *(str(getattr(t, "value", t)) for t in tags)])
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big") >> 1


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SomConfig:
    """Map sizing and training schedule shared by every codebook."""

    target_units: int = STROKECAST_TARGET_UNITS
    schedule: TrainingSchedule = field(default_factory=TrainingSchedule)

    def __post_init__(self) -> None:
        if self.target_units < 4:
            raise ConfigError(f"target_units must be >= 4, got {self.target_units}")

    def to_dict(self) -> dict[str, Any]:
        return {"target_units": self.target_units, "schedule": self.schedule.to_dict()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SomConfig:
        unknown = set(data) - {"target_units", "schedule"}
        if unknown:
            raise ConfigError(f"unknown som keys: {sorted(unknown)}")
        schedule = TrainingSchedule.from_dict(dict(data.get("schedule", {})))
        return cls(
            target_units=int(data.get("target_units", STROKECAST_TARGET_UNITS)),
            schedule=schedule,
        )

    def digest(self) -> str:
        return config_digest(self.to_dict())


# ---------------------------------------------------------------------------
# Model types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Provenance:
    """Where a codebook came from."""

    writers: int
    strokes: int
    seed: int
    schedule: str


@dataclass(frozen=True)
class Codebook:
    """Trained prototypes for one (word, gender, stroke kind) cell."""

    word_id: str
    gender: Gender
    kind: StrokeKind
    M: int
    F: int
    protos: PrototypeSet
    provenance: Provenance

    def __post_init__(self) -> None:
        if self.F != self.kind.feature_count:
            raise ValueError(f"{self.kind.value} codebooks have F={self.kind.feature_count}, got {self.F}")
        if self.protos.dim != self.M * self.F:
            raise ValueError(f"prototype dimension {self.protos.dim} != M*F = {self.M * self.F}")

    @property
    def dim(self) -> int:
        return self.M * self.F

    @property
    def filename(self) -> str:
        return f"{self.gender.value}-{self.kind.value}.cb"


@dataclass(frozen=True)
class WordModel:
    """The four codebooks of one word."""

    word_id: str
    codebooks: Mapping[tuple[Gender, StrokeKind], Codebook]

    def __post_init__(self) -> None:
        books = dict(self.codebooks)
        missing = [cell for cell in CELLS if cell not in books]
        if missing:
            raise ValueError(f"word model {self.word_id!r} lacks cells {missing}")
        if any(cb.word_id != self.word_id for cb in books.values()):
            raise ValueError("all codebooks of a word model must share its word id")
        if len({cb.M for cb in books.values()}) != 1:
            raise ValueError("all codebooks of a word model must share M")
        for (gender, kind), cb in books.items():
            if (cb.gender, cb.kind) != (gender, kind):
                raise ValueError(f"codebook filed under {gender.value}-{kind.value} is {cb.filename}")
        object.__setattr__(self, "codebooks", MappingProxyType(books))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WordModel):
            return NotImplemented
        return self.word_id == other.word_id and dict(self.codebooks) == dict(other.codebooks)

    __hash__ = None  # type: ignore[assignment]

    @property
    def M(self) -> int:
        return next(iter(self.codebooks.values())).M

    def codebook(self, gender: Gender, kind: StrokeKind) -> Codebook:
        return self.codebooks[(gender, kind)]


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def _training_vectors(
    ds: Dataset,
    word: str,
    gender: Gender,
    kind: StrokeKind,
    M: int,
    min_points: int,
    bank: FeatureBank | None,
) -> tuple[np.ndarray, int]:
    if bank is not None and (bank.M, bank.min_points) != (M, min_points):
        raise ConfigError(
            f"feature bank built with M={bank.M}, min_points={bank.min_points}; "
            f"requested M={M}, min_points={min_points}"
        )
    blocks: list[np.ndarray] = []
    writers = 0
    for writer_id in ds.writers_of(gender):
        sessions = ds.recordings_for(writer_id, word)
        if not sessions:
            continue
        writers += 1
        for session, rec in sessions:
            feats = (
                bank.get(writer_id, session, word)
                if bank is not None
                else recording_features(rec, M, min_points)
            )
            blocks.append(feats.of(kind))
    dim = M * kind.feature_count
    data = np.vstack(blocks) if blocks else np.empty((0, dim))
    return data, writers


def build_codebook(
    ds: Dataset,
    word: str,
    gender: Gender,
    kind: StrokeKind,
    M: int = STROKECAST_RESAMPLE_POINTS,
    som_config: SomConfig | None = None,
    seed: int = 0,
    *,
    min_points: int = STROKECAST_MIN_POINTS,
    bank: FeatureBank | None = None,
) -> Codebook:
    """Train the codebook of one (word, gender, kind) cell.

    All strokes of ``kind`` from all sessions of every ``gender`` writer in
    ``ds`` are pooled, a grid is planned around ``som_config.target_units``
    and the map is trained with ``seed``.

    Raises:
        InsufficientDataError: If the cell has no qualifying stroke; the
            message names the (word, gender, kind) cell.
    """
    som_config = som_config or SomConfig()
    data, writers = _training_vectors(ds, word, gender, kind, M, min_points, bank)
    cell = f"word {word!r}, gender {gender.value}, kind {kind.value}"
    if data.shape[0] == 0:
        raise InsufficientDataError(f"no training strokes for {cell}")
    if data.shape[1] != M * kind.feature_count:
        raise InvariantError(f"mixed feature dimensions for {cell}: {data.shape[1]}")

    grid = plan_grid(data, som_config.target_units)
    protos = train(data, grid, som_config.schedule, seed)
    _logger.info(
        "Trained %s codebook: %d strokes from %d writers on a %dx%d grid",
        cell,
        data.shape[0],
        writers,
        grid.rows,
        grid.cols,
    )
    return Codebook(
        word_id=word,
        gender=gender,
        kind=kind,
        M=M,
        F=kind.feature_count,
        protos=protos,
        provenance=Provenance(
            writers=writers,
            strokes=int(data.shape[0]),
            seed=seed,
            schedule=som_config.schedule.digest(),
        ),
    )


def build_word_model(
    ds: Dataset,
    word: str,
    M: int = STROKECAST_RESAMPLE_POINTS,
    som_config: SomConfig | None = None,
    seed: int = 0,
    *,
    min_points: int = STROKECAST_MIN_POINTS,
    bank: FeatureBank | None = None,
) -> WordModel:
    """Train the four codebooks of ``word``; per-cell seeds derive from ``seed``."""
    books = {
        (gender, kind): build_codebook(
            ds,
            word,
            gender,
            kind,
            M,
            som_config,
            derive_seed(seed, word, gender, kind),
            min_points=min_points,
            bank=bank,
        )
        for gender, kind in CELLS
    }
    return WordModel(word, books)


def build_model_set(
    ds: Dataset,
    words: Iterable[str],
    M: int = STROKECAST_RESAMPLE_POINTS,
    som_config: SomConfig | None = None,
    seed: int = 0,
    *,
    min_points: int = STROKECAST_MIN_POINTS,
    bank: FeatureBank | None = None,
    workers: int = STROKECAST_WORKERS,
    on_codebook: Callable[[Codebook], None] | None = None,
) -> dict[str, WordModel]:
    """Train every codebook of several words concurrently.

    Results are identical to calling :func:`build_word_model` per word, in
    any scheduling order.
    """
    word_list = list(dict.fromkeys(words))
    books: dict[str, dict[tuple[Gender, StrokeKind], Codebook]] = {w: {} for w in word_list}
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        future_to_cell = {
            executor.submit(
                build_codebook,
                ds,
                word,
                gender,
                kind,
                M,
                som_config,
                derive_seed(seed, word, gender, kind),
                min_points=min_points,
                bank=bank,
            ): (word, gender, kind)
            for word in word_list
            for gender, kind in CELLS
        }
        for future in as_completed(future_to_cell):
            word, gender, kind = future_to_cell[future]
            codebook = future.result()
            books[word][(gender, kind)] = codebook
            if on_codebook is not None:
                on_codebook(codebook)
    return {word: WordModel(word, books[word]) for word in word_list}


# ---------------------------------------------------------------------------
# Codebook file format
# ---------------------------------------------------------------------------

_HEADER_KEYS = (
    "word",
    "gender",
    "kind",
    "M",
    "F",
    "rows",
    "cols",
    "seed",
    "writers",
    "strokes",
    "schedule",
)


def _checksum(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def codebook_to_text(cb: Codebook) -> str:
    """Serialize a codebook; floats keep 17 significant digits (bit-exact)."""
    header = {
        "word": cb.word_id,
        "gender": cb.gender.value,
        "kind": cb.kind.value,
        "M": cb.M,
        "F": cb.F,
        "rows": cb.protos.grid.rows,
        "cols": cb.protos.grid.cols,
        "seed": cb.provenance.seed,
        "writers": cb.provenance.writers,
        "strokes": cb.provenance.strokes,
        "schedule": cb.provenance.schedule,
    }
    lines = [MAGIC]
    lines += [f"{key}: {header[key]}" for key in _HEADER_KEYS]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in cb.protos.prototypes.tolist()]
    body = "\n".join(lines) + "\n"
    return body + f"checksum: {_checksum(body)}\n"


def codebook_from_text(text: str) -> Codebook:
    """Parse :func:`codebook_to_text` output.

    Raises:
        ModelVersionError: If the magic line is not ``STROKECAST-CB v1``.
        ModelTruncatedError: If the file ends before its checksum line or
            declares more prototypes than it holds.
        ModelChecksumError: If the content does not match the checksum.
        ModelFormatError: For any other malformed header or prototype line.
    """
    lines = text.split("\n")
    if not lines or lines[0].strip() != MAGIC:
        found = lines[0].strip() if lines else ""
        raise ModelVersionError(f"expected {MAGIC!r}, found {found!r}")
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines[-1].startswith("checksum: "):
        raise ModelTruncatedError("codebook file ends without a checksum line")
    body = "\n".join(lines[:-1]) + "\n"
    expected = lines[-1].removeprefix("checksum: ").strip()
    if _checksum(body) != expected:
        raise ModelChecksumError("codebook content does not match its checksum")

    content = lines[1:-1]
    if len(content) < len(_HEADER_KEYS):
        raise ModelTruncatedError("codebook header is incomplete")
    header: dict[str, str] = {}
    for key, line in zip(_HEADER_KEYS, content, strict=False):
        name, sep, value = line.partition(": ")
        if not sep or name != key:
            raise ModelFormatError(f"expected header {key!r}, found {line!r}")
        header[key] = value
    try:
        grid = GridSpec(int(header["rows"]), int(header["cols"]))
        M, F = int(header["M"]), int(header["F"])
        rows = content[len(_HEADER_KEYS) :]
        if len(rows) < grid.units:
            raise ModelTruncatedError(f"expected {grid.units} prototypes, found {len(rows)}")
        if len(rows) > grid.units:
            raise ModelFormatError(f"expected {grid.units} prototypes, found {len(rows)}")
        protos = np.array([[float(tok) for tok in row.split()] for row in rows])
        return Codebook(
            word_id=header["word"],
            gender=Gender(header["gender"]),
            kind=StrokeKind(header["kind"]),
            M=M,
            F=F,
            protos=PrototypeSet(grid, protos.reshape(grid.units, -1)),
            provenance=Provenance(
                writers=int(header["writers"]),
                strokes=int(header["strokes"]),
                seed=int(header["seed"]),
                schedule=header["schedule"],
            ),
        )
    except ModelFormatError:
        raise
    except ValueError as exc:
        raise ModelFormatError(f"malformed codebook: {exc}") from exc


def save_codebook(cb: Codebook, path: str | Path) -> Path:
    fp = Path(path)
    fp.parent.mkdir(parents=True, exist_ok=True)
    fp.write_text(codebook_to_text(cb), encoding="utf-8", newline="\n")
    return fp


def load_codebook(path: str | Path) -> Codebook:
    return codebook_from_text(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Word models and model sets on disk
# ---------------------------------------------------------------------------


def save_model(model: WordModel, root: str | Path, config_digest: str | None = None) -> Path:
    """Write ``root/<word>/<gender>-<kind>.cb`` for all four cells plus ``index.json``.

    Returns:
        Path: The word directory.
    """
    word_dir = Path(root) / model.word_id
    paths: dict[str, str] = {}
    for gender, kind in CELLS:
        cb = model.codebook(gender, kind)
        save_codebook(cb, word_dir / cb.filename)
        paths[f"{gender.value}-{kind.value}"] = cb.filename
    digest = config_digest or model.codebook(*CELLS[0]).provenance.schedule
    index = {"word": model.word_id, "format": MAGIC, "codebooks": paths, "config_digest": digest}
    write_json(index, word_dir / WORD_INDEX)
    return word_dir


def load_model(path: str | Path) -> WordModel:
    """Load a word directory written by :func:`save_model`."""
    word_dir = Path(path)
    index_path = word_dir / WORD_INDEX
    if not index_path.is_file():
        raise ModelFormatError(f"missing {WORD_INDEX} in {word_dir}")
    try:
        index = json.loads(index_path.read_text(encoding="utf-8"))
        entries = index["codebooks"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ModelFormatError(f"malformed {index_path}: {exc}") from exc
    books: dict[tuple[Gender, StrokeKind], Codebook] = {}
    for gender, kind in CELLS:
        name = entries.get(f"{gender.value}-{kind.value}")
        if name is None:
            raise ModelFormatError(f"{index_path} lists no {gender.value}-{kind.value} codebook")
        cb = load_codebook(word_dir / name)
        books[(cb.gender, cb.kind)] = cb
    try:
        return WordModel(index.get("word", word_dir.name), books)
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from exc


def save_model_set(
    models: Mapping[str, WordModel],
    root: str | Path,
    *,
    som_config: SomConfig | None = None,
    min_points: int = STROKECAST_MIN_POINTS,
    seed: int | None = None,
) -> Path:
    """Write every word model plus a top-level ``models.json``."""
    root_path = Path(root)
    som_config = som_config or SomConfig()
    digest = som_config.digest()
    for model in models.values():
        save_model(model, root_path, config_digest=digest)
    M = next(iter(models.values())).M if models else STROKECAST_RESAMPLE_POINTS
    index = {
        "format": MAGIC,
        "words": list(models),
        "resample_points": M,
        "min_points": min_points,
        "seed": seed,
        "som": som_config.to_dict(),
        "config_digest": digest,
    }
    write_json(index, root_path / MODEL_INDEX)
    return root_path


def read_model_index(root: str | Path) -> dict[str, Any]:
    """Return the parsed ``models.json`` of a model set."""
    index_path = Path(root) / MODEL_INDEX
    if not index_path.is_file():
        raise ModelFormatError(f"missing {MODEL_INDEX} in {root}")
    try:
        data = json.loads(index_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"malformed {index_path}: {exc}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("words"), list):
        raise ModelFormatError(f"{index_path} has no word list")
    return data


def load_model_set(root: str | Path) -> dict[str, WordModel]:
    """Load all word models listed in ``root/models.json``."""
    index = read_model_index(root)
    return {word: load_model(Path(root) / word) for word in index["words"]}
