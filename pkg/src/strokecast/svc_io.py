"""SVC trajectory files, writer manifests and on-disk datasets.

An SVC document is plain text: the first line holds the decimal point count
``N``; each of the following ``N`` lines holds seven whitespace-separated
integers ``x y ts bs az al pr``. A trailing newline is optional.

Datasets live in a directory tree ``root/<writer>/<session>/<word>.svc`` next
to a manifest of ``writer_id,gender`` lines. Files that cannot be used are
skipped and reported instead of aborting the load, so that
``len(ds.recordings) + len(ds.skipped)`` always equals the number of
``.svc`` files under ``root``.

Examples:
    >>> rec = parse_svc("2\\n0 0 0 1 0 0 300\\n10 10 10 1 0 0 310", word_id="A")
    >>> len(rec)
    2
    >>> write_svc(rec)
    '2\\n0 0 0 1 0 0 300\\n10 10 10 1 0 0 310\\n'
"""

from __future__ import annotations

import logging
import re
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from strokecast.constants import ManifestError, SkippedRecordingWarning, SvcFormatError
from strokecast.domain.value_objects import (
    BS,
    PR,
    SVC_FIELDS,
    TS,
    Dataset,
    Gender,
    RecordingKey,
    SkipReport,
    WordRecording,
)
from strokecast.infrastructure.settings import STROKECAST_WORKERS

_logger = logging.getLogger(__name__)

__all__: list[str] = [
    "MANIFEST_NAME",
    "load_dataset",
    "load_manifest",
    "parse_svc",
    "read_svc",
    "save_dataset",
    "write_manifest",
    "write_svc",
    "write_svc_file",
]

MANIFEST_NAME = "manifest.csv"
_SESSION_DIR = re.compile(r"^(?:session|s)?0*(\d+)$", re.IGNORECASE)


# ---------------------------------------------------------------------------
# Single documents
# ---------------------------------------------------------------------------


def parse_svc(text: str, word_id: str = "") -> WordRecording:
    """Parse one SVC document into a :class:`WordRecording`.

    Args:
        text: Complete document contents.
        word_id: Label stored on the recording (file stem when read from disk).

    Returns:
        WordRecording: Recording whose length equals the header count.

    Raises:
        SvcFormatError: With the 1-based line number for a missing or
            non-integer header, a body line without exactly seven integer
            tokens, ``bs`` outside {0, 1}, negative pressure, a decreasing
            timestamp, or a header/body count mismatch.
    """
    lines = text.replace("\r\n", "\n").split("\n")
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise SvcFormatError(1, "empty document, expected a point count")

    header = lines[0].strip()
    try:
        declared = int(header)
    except ValueError:
        raise SvcFormatError(1, f"point count {header!r} is not an integer") from None
    if declared < 1:
        raise SvcFormatError(1, f"point count must be >= 1, got {declared}")

    body = lines[1:]
    if len(body) != declared:
        raise SvcFormatError(1, f"declared {declared} points, found {len(body)}")

    rows = np.empty((declared, len(SVC_FIELDS)), dtype=np.int64)
    for i, line in enumerate(body):
        lineno = i + 2
        tokens = line.split()
        if len(tokens) != len(SVC_FIELDS):
            raise SvcFormatError(
                lineno, f"expected {len(SVC_FIELDS)} integers, found {len(tokens)} tokens"
            )
        for j, tok in enumerate(tokens):
            try:
                rows[i, j] = int(tok)
            except ValueError:
                raise SvcFormatError(
                    lineno, f"{SVC_FIELDS[j]} token {tok!r} is not an integer"
                ) from None
        if rows[i, BS] not in (0, 1):
            raise SvcFormatError(lineno, f"bs={rows[i, BS]} out of range {{0, 1}}")
        if rows[i, PR] < 0:
            raise SvcFormatError(lineno, f"pr={rows[i, PR]} is negative")
        if i and rows[i, TS] < rows[i - 1, TS]:
            raise SvcFormatError(
                lineno, f"timestamp {rows[i, TS]} precedes {rows[i - 1, TS]}"
            )
    return WordRecording(word_id, rows)


def write_svc(recording: WordRecording) -> str:
    """Render a recording as an SVC document with a trailing newline."""
    body = "\n".join(" ".join(str(v) for v in row) for row in recording.data.tolist())
    return f"{len(recording)}\n{body}\n"


def read_svc(path: str | Path, word_id: str | None = None) -> WordRecording:
    """Read an SVC file; the word id defaults to the file stem."""
    fp = Path(path)
    return parse_svc(fp.read_text(encoding="utf-8"), word_id=word_id or fp.stem)


def write_svc_file(recording: WordRecording, path: str | Path) -> Path:
    fp = Path(path)
    fp.parent.mkdir(parents=True, exist_ok=True)
    fp.write_text(write_svc(recording), encoding="utf-8", newline="\n")
    return fp


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


def load_manifest(path: str | Path) -> dict[str, Gender]:
    """Read ``writer_id,gender`` pairs.

    Blank lines, ``#`` comments and a literal ``writer_id,gender`` header are
    ignored.

    Raises:
        ManifestError: If the file is missing, a row is malformed, a gender is
            not ``M``/``F``, or a writer is listed twice. The offending row is
            attached to the error.
    """
    fp = Path(path)
    if not fp.is_file():
        raise ManifestError(f"manifest not found: {fp}")
    writers: dict[str, Gender] = {}
    for lineno, raw in enumerate(fp.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2 or not parts[0]:
            raise ManifestError(f"line {lineno}: expected 'writer_id,gender'", row=raw)
        writer_id, label = parts
        if (writer_id.lower(), label.lower()) == ("writer_id", "gender"):
            continue
        try:
            gender = Gender.parse(label)
        except ValueError:
            raise ManifestError(
                f"line {lineno}: gender must be M or F", row=raw
            ) from None
        if writer_id in writers:
            raise ManifestError(f"line {lineno}: duplicate writer {writer_id!r}", row=raw)
        writers[writer_id] = gender
    return writers


def write_manifest(writers: dict[str, Gender], path: str | Path) -> Path:
    fp = Path(path)
    fp.parent.mkdir(parents=True, exist_ok=True)
    lines = ["writer_id,gender"] + [f"{w},{g.value}" for w, g in writers.items()]
    fp.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return fp


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------


def _session_id(name: str) -> int | None:
    match = _SESSION_DIR.match(name)
    if not match:
        return None
    session = int(match.group(1))
    return session if session >= 1 else None


def _load_one(
    path: Path, root: Path, writers: dict[str, Gender]
) -> tuple[RecordingKey, WordRecording] | SkipReport:
    rel = path.relative_to(root)
    if len(rel.parts) != 3:
        return SkipReport(str(path), "not at <writer>/<session>/<word>.svc")
    writer_id, session_dir, _ = rel.parts
    if writer_id not in writers:
        return SkipReport(str(path), f"writer {writer_id!r} not in manifest")
    session = _session_id(session_dir)
    if session is None:
        return SkipReport(str(path), f"session directory {session_dir!r} is not a positive integer")
    try:
        rec = read_svc(path)
    except SvcFormatError as exc:
        return SkipReport(str(path), str(exc))
    except (OSError, UnicodeDecodeError) as exc:
        return SkipReport(str(path), f"unreadable: {exc}")
    return (writer_id, session, rec.word_id), rec


def load_dataset(
    root: str | Path,
    manifest: str | Path | None = None,
    *,
    workers: int = STROKECAST_WORKERS,
) -> Dataset:
    """Load every recording under ``root`` labelled by ``manifest``.

    Args:
        root: Dataset directory laid out as ``<writer>/<session>/<word>.svc``.
        manifest: Manifest path; defaults to ``root/manifest.csv``.
        workers: Threads used to parse files.

    Returns:
        Dataset: All usable recordings; every unusable ``.svc`` file appears
        once in ``Dataset.skipped`` and is announced with a
        :class:`SkippedRecordingWarning`.

    Raises:
        ManifestError: Propagated from :func:`load_manifest`.
    """
    root_path = Path(root)
    writers = load_manifest(manifest if manifest is not None else root_path / MANIFEST_NAME)
    files = sorted(root_path.rglob("*.svc"))
    _logger.debug("Loading %d SVC files from %s", len(files), root_path)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        outcomes = list(executor.map(lambda p: _load_one(p, root_path, writers), files))

    recordings: dict[RecordingKey, WordRecording] = {}
    sources: dict[RecordingKey, Path] = {}
    skipped: list[SkipReport] = []
    for path, outcome in zip(files, outcomes, strict=True):
        if isinstance(outcome, SkipReport):
            skipped.append(outcome)
            continue
        key, rec = outcome
        if key in sources:
            # two spellings of one session directory
            skipped.append(SkipReport(str(path), f"duplicate of {sources[key]}"))
            continue
        sources[key] = path
        recordings[key] = rec

    for report in skipped:
        _logger.info("Skipped %s: %s", report.path, report.reason)
        warnings.warn(
            f"skipped {report.path}: {report.reason}", SkippedRecordingWarning, stacklevel=2
        )
    return Dataset(writers=writers, recordings=recordings, skipped=tuple(skipped))


def save_dataset(ds: Dataset, root: str | Path) -> Path:
    """Write ``ds`` as an SVC tree plus ``manifest.csv`` and return ``root``."""
    root_path = Path(root)
    root_path.mkdir(parents=True, exist_ok=True)
    write_manifest(dict(ds.writers), root_path / MANIFEST_NAME)
    for (writer_id, session, word), rec in sorted(ds.recordings.items()):
        write_svc_file(rec, root_path / writer_id / str(session) / f"{word}.svc")
    return root_path
