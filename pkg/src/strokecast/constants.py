"""Constants, exception definitions and warning categories for Strokecast.

This module centralizes the exception hierarchy and the warning classes used
throughout the package, together with the warning formatting applied to
every non-fatal condition.

Key Components:
    * Exception hierarchy rooted at :class:`StrokecastError`
    * Exit-code mapping used by the command-line interface
    * Warning classes for non-fatal data conditions
    * Warning format configuration

Exit codes:
    The CLI maps every exception family to a stable process exit code:
    ``ConfigError`` → 2, ``DataError`` → 3, ``InvariantError`` → 4.
"""

from __future__ import annotations

import warnings

warnings.formatwarning = lambda msg, cat, *_args, **_kwargs: (
    f"{cat.__name__}: {msg}\n"
)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_DATA_ERROR = 3
EXIT_INVARIANT_ERROR = 4


# ---------------------------------------------------------------------------
# Exceptions
# ---------------------------------------------------------------------------


class StrokecastError(Exception):
    """Root of every error raised deliberately by Strokecast."""

    exit_code: int = 1


class ConfigError(StrokecastError, ValueError):
    """Raised for invalid configuration values or argument combinations."""

    exit_code = EXIT_CONFIG_ERROR


class DataError(StrokecastError):
    """Raised when input data (files, datasets, models) is unusable."""

    exit_code = EXIT_DATA_ERROR


class SvcFormatError(DataError):
    """Raised when an SVC document is malformed.

    Attributes:
        line: 1-based line number of the offending line (0 when the problem
            concerns the document as a whole).
        reason: Human-readable description without the location prefix.
    """

    def __init__(self, line: int, reason: str) -> None:
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class ManifestError(DataError):
    """Raised for a missing or malformed writer/gender manifest."""

    def __init__(self, message: str, row: str | None = None) -> None:
        self.row = row
        if row is not None:
            message = f"{message}: {row!r}"
        super().__init__(message)


class InsufficientDataError(DataError):
    """Raised when a model or decision has no qualifying evidence."""


class UnknownWriterError(DataError, KeyError):
    """Raised when a writer id is absent from a dataset."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown writer"


class ModelFormatError(DataError):
    """Raised when a codebook file cannot be decoded."""


class ModelVersionError(ModelFormatError):
    """Raised when a codebook file carries an unexpected magic line."""


class ModelChecksumError(ModelFormatError):
    """Raised when codebook content does not match its checksum."""


class ModelTruncatedError(ModelFormatError):
    """Raised when a codebook file ends before its declared content."""


class DimensionMismatchError(StrokecastError, ValueError):
    """Raised when vector dimensions or stroke kinds do not line up."""

    exit_code = EXIT_DATA_ERROR


class UndefinedCorrelationError(StrokecastError, ValueError):
    """Raised when a Pearson coefficient is requested for constant input."""

    exit_code = EXIT_DATA_ERROR


class InvariantError(StrokecastError):
    """Raised when an internal invariant fails (a bug, not bad input)."""

    exit_code = EXIT_INVARIANT_ERROR


# ---------------------------------------------------------------------------
# Warnings
# ---------------------------------------------------------------------------


class EmptyEvidenceWarning(Warning):
    """A word or session had no strokes of the kind being scored.

    The affected distortion contributes 0 to the score.
    """


class DroppedRunWarning(Warning):
    """Segmentation dropped constant-button runs shorter than ``min_points``."""


class SkippedRecordingWarning(Warning):
    """Dataset loading skipped an SVC file that could not be used."""
