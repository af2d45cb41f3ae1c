"""Strokecast runtime configuration and settings management.

Runtime defaults follow the 12-factor approach: every knob that an operator
may want to change between machines is read from an environment variable
once, at import time, and exposed as a module constant. Typed configuration
objects (``SomConfig``, ``SynthConfig``, ``ExperimentConfig``) take their
defaults from here, so a single export changes every entry point.

Environment Variables:
    STROKECAST_WORKERS: Worker threads for codebook training and
        classification (default 4).
    STROKECAST_RESAMPLE_POINTS: Fixed resample length M per stroke
        (default 16).
    STROKECAST_TARGET_UNITS: Target SOM unit count per codebook
        (default 150).
    STROKECAST_MIN_POINTS: Shortest constant-button run kept as a stroke
        (default 2).
    STROKECAST_P_THRESHOLD: p-value threshold for significance
        (default 0.01).

Malformed values are ignored with a logged warning and the default is used.
"""

from __future__ import annotations

import logging
import os

_logger = logging.getLogger(__name__)

__all__: list[str] = [
    "STROKECAST_MIN_POINTS",
    "STROKECAST_P_THRESHOLD",
    "STROKECAST_RESAMPLE_POINTS",
    "STROKECAST_TARGET_UNITS",
    "STROKECAST_WORKERS",
]


def _int_env(name: str, default: int, minimum: int) -> int:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        value = int(raw)
    except ValueError:
        _logger.warning("Ignoring %s=%r: not an integer", name, raw)
        return default
    if value < minimum:
        _logger.warning("Ignoring %s=%r: must be >= %d", name, raw, minimum)
        return default
    return value


def _float_env(name: str, default: float, low: float, high: float) -> float:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        value = float(raw)
    except ValueError:
        _logger.warning("Ignoring %s=%r: not a number", name, raw)
        return default
    if not low < value < high:
        _logger.warning("Ignoring %s=%r: must lie in (%g, %g)", name, raw, low, high)
        return default
    return value


# ---------------------------------------------------------------------------
# Concurrency
# ---------------------------------------------------------------------------

STROKECAST_WORKERS: int = _int_env("STROKECAST_WORKERS", 4, 1)

# ---------------------------------------------------------------------------
# Feature extraction
# ---------------------------------------------------------------------------

STROKECAST_RESAMPLE_POINTS: int = _int_env("STROKECAST_RESAMPLE_POINTS", 16, 2)
STROKECAST_MIN_POINTS: int = _int_env("STROKECAST_MIN_POINTS", 2, 2)

# ---------------------------------------------------------------------------
# Codebooks and statistics
# ---------------------------------------------------------------------------

STROKECAST_TARGET_UNITS: int = _int_env("STROKECAST_TARGET_UNITS", 150, 4)
STROKECAST_P_THRESHOLD: float = _float_env("STROKECAST_P_THRESHOLD", 0.01, 0.0, 1.0)
