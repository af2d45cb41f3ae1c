"""JSON helpers for configs, model indexes and experiment summaries.

Everything strokecast writes as JSON passes through :func:`normalize_value`
first, so numpy results, enums and frozen config dataclasses can be dumped
with ``allow_nan=False``. :func:`config_digest` gives the short provenance
hash stored next to trained codebooks and experiment results.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from collections.abc import Mapping
from enum import Enum
from pathlib import Path, PurePath
from typing import Any

import numpy as np
import pandas as pd

__all__: list[str] = [
    "config_digest",
    "normalize_value",
    "write_json",
]

DIGEST_LENGTH = 12


def normalize_value(val: Any) -> Any:
    """Recursively turn ``val`` into str, int, float, bool, list, dict or None.

    Enum members become their value, paths POSIX strings and dataclasses a
    dict of their public fields. Frames become record lists, numpy values
    native scalars or nested lists. NaN, infinities, ``pd.NA`` and ``NaT``
    become ``None``. Sets are sorted so the output is stable.

    Examples:
        >>> from strokecast.domain.value_objects import Gender
        >>> normalize_value({"gender": Gender.MALE, "rates": np.array([0.5, 1.0])})
        {'gender': 'M', 'rates': [0.5, 1.0]}
    """
    if val is None or _not_representable(val):
        return None
    if isinstance(val, Enum):
        return normalize_value(val.value)
    if isinstance(val, np.generic):
        return normalize_value(val.item())
    if isinstance(val, bool | int | float | str):
        return val
    if isinstance(val, np.ndarray):
        return normalize_value(val.tolist())
    if isinstance(val, PurePath):
        return val.as_posix()
    if dataclasses.is_dataclass(val) and not isinstance(val, type):
        public = {f.name: getattr(val, f.name) for f in dataclasses.fields(val) if not f.name.startswith("_")}
        return _normalize_mapping(public)
    if isinstance(val, pd.DataFrame):
        return normalize_value(val.to_dict(orient="records"))
    if isinstance(val, pd.Series):
        return normalize_value(val.to_list())
    if isinstance(val, Mapping):
        return _normalize_mapping(val)
    if isinstance(val, set | frozenset):
        return [normalize_value(item) for item in sorted(val, key=str)]
    if isinstance(val, list | tuple):
        return [normalize_value(item) for item in val]
    return str(val)


def _normalize_mapping(val: Mapping[Any, Any]) -> dict[Any, Any]:
    return {_key(k): normalize_value(v) for k, v in val.items()}


def _key(k: Any) -> str | int | float | bool | None:
    if isinstance(k, Enum):
        return str(k.value)
    if k is None or isinstance(k, str | int | float | bool):
        return k
    return str(k)


def _not_representable(val: Any) -> bool:
    if val is pd.NA or val is pd.NaT:
        return True
    if isinstance(val, float | np.floating):
        return not math.isfinite(float(val))
    return False


def config_digest(data: Any) -> str:
    """First 12 hex chars of sha256 over canonical (sorted, compact) JSON."""
    canonical = json.dumps(
        normalize_value(data), sort_keys=True, separators=(",", ":"), allow_nan=False
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:DIGEST_LENGTH]


def write_json(data: Any, path: str | Path) -> Path:
    """Normalize ``data`` and write it as indented JSON."""
    fp = Path(path)
    fp.parent.mkdir(parents=True, exist_ok=True)
    with fp.open("w", encoding="utf-8") as fh:
        json.dump(normalize_value(data), fh, indent=2, ensure_ascii=False, allow_nan=False)
        fh.write("\n")
    return fp
