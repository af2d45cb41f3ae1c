"""Tests for strokecast.common.serialization."""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from strokecast.common.serialization import config_digest, normalize_value, write_json
from strokecast.domain.value_objects import Channel, Gender


@dataclass
class _Point:
    name: str
    values: np.ndarray
    _cache: int = 0


class TestNormalizeValue:
    """Test conversion to JSON primitives."""

    def test_basic_types(self):
        assert normalize_value("string") == "string"
        assert normalize_value(42) == 42
        assert normalize_value(3.5) == 3.5
        assert normalize_value(True) is True
        assert normalize_value(None) is None

    @pytest.mark.parametrize("value", [float("nan"), float("inf"), np.float64("nan"), pd.NA])
    def test_missing_values_become_none(self, value):
        assert normalize_value(value) is None

    def test_numpy_values(self):
        assert normalize_value(np.int64(7)) == 7
        assert isinstance(normalize_value(np.int64(7)), int)
        assert normalize_value(np.float32(0.5)) == 0.5
        assert normalize_value(np.bool_(True)) is True
        assert normalize_value(np.array([[1, 2], [3, 4]])) == [[1, 2], [3, 4]]

    def test_enums_and_enum_keys(self):
        data = {Channel.COMBINED: [Gender.MALE, Gender.FEMALE]}
        assert normalize_value(data) == {"combined": ["M", "F"]}

    def test_dataclass_skips_private_fields(self):
        point = _Point("a", np.array([1.0, np.nan]))
        assert normalize_value(point) == {"name": "a", "values": [1.0, None]}

    def test_pandas(self):
        frame = pd.DataFrame({"word": ["ALFA", "BETA"], "rate": [0.5, 0.75]})
        assert normalize_value(frame) == [
            {"word": "ALFA", "rate": 0.5},
            {"word": "BETA", "rate": 0.75},
        ]
        assert normalize_value(frame["rate"]) == [0.5, 0.75]

    def test_paths_tuples_and_sets(self):
        assert normalize_value(Path("a") / "b.svc") == "a/b.svc"
        assert normalize_value((1, 2)) == [1, 2]
        assert normalize_value({"b", "a"}) == ["a", "b"]


class TestWriteJson:
    """Test JSON file output."""

    def test_writes_indented_json(self, tmp_path: Path):
        fp = write_json({"rate": np.float64(0.625), "n": np.int64(8)}, tmp_path / "x" / "s.json")
        text = fp.read_text(encoding="utf-8")
        assert text.endswith("\n")
        assert json.loads(text) == {"rate": 0.625, "n": 8}
        assert '\n  "rate"' in text


class TestConfigDigest:
    """Test the provenance hash."""

    def test_digest_ignores_key_order(self):
        assert config_digest({"a": 1, "b": [1, 2]}) == config_digest({"b": (1, 2), "a": 1})

    def test_digest_is_short_hex(self):
        digest = config_digest({"seed": np.int64(3), "channel": Channel.COMBINED})
        assert len(digest) == 12
        int(digest, 16)

    def test_digest_changes_with_values(self):
        assert config_digest({"seed": 1}) != config_digest({"seed": 2})
