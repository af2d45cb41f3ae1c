"""Pure domain types for Strokecast.

Pen samples, word recordings, labelled datasets and the enumerations shared
by every other layer. Nothing in this package touches the file system.
"""

from strokecast.domain.value_objects import (
    Channel,
    Dataset,
    Decision,
    Gender,
    PenSample,
    SessionFusion,
    SkipReport,
    StrokeKind,
    TrainingMode,
    WordRecording,
)

__all__: list[str] = [
    "Channel",
    "Dataset",
    "Decision",
    "Gender",
    "PenSample",
    "SessionFusion",
    "SkipReport",
    "StrokeKind",
    "TrainingMode",
    "WordRecording",
]
