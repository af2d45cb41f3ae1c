"""Tests for segmentation, resampling and feature extraction."""

from __future__ import annotations

import numpy as np
import pytest

from strokecast.constants import ConfigError, DroppedRunWarning
from strokecast.domain.value_objects import PR, X, Y, Gender, StrokeKind, WordRecording
from strokecast.stroke_pipeline import (
    FeatureStroke,
    Stroke,
    dump_feature_strokes,
    extract_features,
    normalize,
    recording_features,
    resample,
    segment,
    selected_columns,
    to_feature_stroke,
)
from tests.conftest import make_dataset, make_recording


def _runs_oracle(bs: list[int], min_points: int):
    """Brute-force run-length scan: (down spans, up spans, dropped spans)."""
    down, up, dropped = [], [], []
    start = 0
    for i in range(1, len(bs) + 1):
        if i == len(bs) or bs[i] != bs[start]:
            span = (start, i - 1)
            if i - start < min_points:
                dropped.append(span)
            elif bs[start] == 1:
                down.append(span)
            else:
                up.append(span)
            start = i
    return down, up, dropped


def _interp_oracle(values: np.ndarray, M: int) -> np.ndarray:
    n = len(values)
    out = np.empty(M)
    for j in range(M):
        t = j * (n - 1) / (M - 1)
        i = min(int(t), n - 2)
        frac = t - i
        out[j] = values[i] * (1.0 - frac) + values[i + 1] * frac
    return out


class TestSegment:
    """Test segment() against an independent run-length scanner."""

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            n = int(rng.integers(1, 40))
            bs = rng.integers(0, 2, n).tolist()
            min_points = int(rng.integers(2, 5))
            seg = segment(make_recording("W", bs), min_points)
            down, up, dropped = _runs_oracle(bs, min_points)
            assert [s.span for s in seg.pen_down] == down
            assert [s.span for s in seg.pen_up] == up
            assert seg.dropped == dropped

    def test_spans_tile_the_recording(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            bs = rng.integers(0, 2, int(rng.integers(1, 60))).tolist()
            seg = segment(make_recording("W", bs), 3)
            spans = sorted([s.span for s in seg.pen_down + seg.pen_up] + seg.dropped)
            covered = [i for a, b in spans for i in range(a, b + 1)]
            assert covered == list(range(len(bs)))

    def test_pen_up_pressure_is_zeroed(self):
        rec = make_recording("W", [1, 1, 0, 0, 0, 1, 1], seed=3)
        noisy = rec.data.copy()
        noisy[:, PR] = 77
        seg = segment(WordRecording("W", noisy), 2)
        assert all((s.points[:, PR] == 0).all() for s in seg.pen_up)
        assert all((s.points[:, PR] == 77).all() for s in seg.pen_down)

    def test_single_sample_recording_is_all_dropped(self):
        seg = segment(make_recording("W", [1]), 2)
        assert seg.pen_down == [] and seg.pen_up == []
        assert seg.dropped == [(0, 0)]
        assert seg.dropped_count == 1

    def test_min_points_below_two_rejected(self):
        with pytest.raises(ConfigError):
            segment(make_recording("W", [1, 1]), 1)

    def test_strokes_accessor(self):
        seg = segment(make_recording("W", [0, 0, 1, 1]), 2)
        assert seg.strokes(StrokeKind.PEN_UP) == seg.pen_up
        assert seg.strokes(StrokeKind.PEN_DOWN) == seg.pen_down


class TestResample:
    """Test resample() against a piecewise-linear interpolation loop."""

    @pytest.mark.parametrize("M", [2, 5, 16, 33])
    def test_matches_interpolation_oracle(self, M):
        rng = np.random.default_rng(M)
        for n in (2, 3, 7, 16, 40):
            points = np.zeros((n, 7), dtype=np.int64)
            points[:, 0] = rng.integers(0, 100, n)
            points[:, 1] = rng.integers(0, 100, n)
            points[:, 3] = 1
            points[:, 6] = rng.integers(0, 100, n)
            stroke = Stroke(StrokeKind.PEN_DOWN, points, (0, n - 1))
            out = resample(stroke, M)
            assert out.shape == (M, 3)
            for c, col in enumerate(selected_columns(StrokeKind.PEN_DOWN)):
                expected = _interp_oracle(points[:, col].astype(float), M)
                np.testing.assert_allclose(out[:, c], expected, rtol=0, atol=1e-12)

    def test_endpoints_reproduced_exactly(self):
        points = np.array([[3, 9, 0, 0, 0, 0, 0], [8, 1, 10, 0, 0, 0, 0], [5, 5, 20, 0, 0, 0, 0]])
        out = resample(Stroke(StrokeKind.PEN_UP, points, (0, 2)), 11)
        assert out.shape == (11, 2)
        assert out[0].tolist() == [3.0, 9.0]
        assert out[-1].tolist() == [5.0, 5.0]

    def test_equal_length_is_identity(self):
        points = np.array([[i, 2 * i, i, 1, 0, 0, 100 + i] for i in range(6)])
        out = resample(Stroke(StrokeKind.PEN_DOWN, points, (0, 5)), 6)
        assert np.array_equal(out, points[:, [0, 1, 6]].astype(float))

    def test_invalid_lengths(self):
        points = np.array([[0, 0, 0, 1, 0, 0, 1], [1, 1, 1, 1, 0, 0, 1]])
        stroke = Stroke(StrokeKind.PEN_DOWN, points, (0, 1))
        with pytest.raises(ConfigError):
            resample(stroke, 1)
        with pytest.raises(ValueError):
            resample(Stroke(StrokeKind.PEN_DOWN, points[:1], (0, 0)), 4)


class TestNormalize:
    """Test per-channel z-normalization."""

    def test_zero_mean_unit_std(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            out = normalize(rng.normal(500.0, 120.0, int(rng.integers(2, 64))))
            assert abs(out.mean()) < 1e-9
            assert abs(out.std() - 1.0) < 1e-9

    def test_constant_channel_maps_to_zero(self):
        assert normalize(np.full(7, 42.0)).tolist() == [0.0] * 7

    def test_empty_channel_rejected(self):
        with pytest.raises(ValueError):
            normalize([])


class TestFeatureStroke:
    """Test flattening and the feature vector layout."""

    def test_point_major_layout(self):
        rec = make_recording("W", [1] * 9, seed=5)
        stroke = segment(rec, 2).pen_down[0]
        fs = to_feature_stroke(stroke, 4)
        assert (fs.kind, fs.M, fs.F) == (StrokeKind.PEN_DOWN, 4, 3)
        assert fs.vector.shape == (12,)
        matrix = fs.as_matrix()
        np.testing.assert_array_equal(matrix[1], fs.vector[3:6])
        for c in range(3):
            assert abs(matrix[:, c].mean()) < 1e-9

    @pytest.mark.parametrize("kind_bs", [1, 0])
    def test_invariant_to_translation_and_positive_scaling(self, kind_bs):
        rec = make_recording("W", [kind_bs] * 11, seed=9)
        seg = segment(rec, 2)
        stroke = (seg.pen_down if kind_bs else seg.pen_up)[0]
        rng = np.random.default_rng(4)
        for _ in range(20):
            points = stroke.points.astype(np.int64)
            points[:, X] = points[:, X] * int(rng.integers(1, 9)) + int(rng.integers(-500, 500))
            points[:, Y] = points[:, Y] * int(rng.integers(1, 9)) + int(rng.integers(-500, 500))
            points[:, PR] = points[:, PR] * int(rng.integers(1, 5))
            moved = Stroke(stroke.kind, points, stroke.span)
            np.testing.assert_allclose(
                to_feature_stroke(moved, 6).vector,
                to_feature_stroke(stroke, 6).vector,
                atol=1e-9,
            )

    def test_vector_length_must_match(self):
        with pytest.raises(ValueError):
            FeatureStroke(StrokeKind.PEN_UP, 4, 2, np.zeros(7))

    def test_vector_is_read_only(self):
        fs = FeatureStroke(StrokeKind.PEN_UP, 2, 2, np.zeros(4))
        with pytest.raises(ValueError):
            fs.vector[0] = 1.0

    def test_dump_format(self):
        fs = FeatureStroke(StrokeKind.PEN_UP, 2, 2, [0.5, -1.0, 0.25, 1.0])
        assert dump_feature_strokes([fs]) == "up 2 2 0.5,-1,0.25,1\n"
        assert dump_feature_strokes([]) == ""


class TestRecordingFeatures:
    """Test recording- and dataset-level extraction."""

    def test_recording_features_shapes(self):
        rec = make_recording("W", [1, 1, 1, 0, 0, 1, 1, 1, 1, 0], seed=2)
        feats = recording_features(rec, 5, 2)
        assert feats.pen_down.shape == (2, 15)
        assert feats.pen_up.shape == (1, 10)
        assert feats.dropped == 1
        assert feats.of(StrokeKind.PEN_UP) is feats.pen_up

    def test_no_strokes_of_a_kind_gives_empty_matrix(self):
        feats = recording_features(make_recording("W", [1, 1, 1]), 4, 2)
        assert feats.pen_up.shape == (0, 8)

    def test_extract_features_bank(self):
        ds = make_dataset({"w1": Gender.MALE, "w2": Gender.FEMALE}, sessions=2)
        bank = extract_features(ds, 6, 2, workers=2)
        assert (bank.M, bank.min_points) == (6, 2)
        assert set(bank.features) == set(ds.recordings)
        expected = recording_features(ds.recordings[("w2", 1, "ALFA")], 6, 2)
        assert np.array_equal(bank.get("w2", 1, "ALFA").pen_down, expected.pen_down)
        assert bank.dropped_runs == 0

    def test_dropped_runs_warn_once(self):
        ds = make_dataset({"w1": Gender.MALE}, bs=(1, 1, 0, 1, 1, 1))
        with pytest.warns(DroppedRunWarning, match="dropped 2 runs"):
            bank = extract_features(ds, 4, 2)
        assert bank.dropped_runs == 2
