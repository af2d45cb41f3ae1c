"""Tests for minimum-distortion classification."""

from __future__ import annotations

import warnings
from dataclasses import replace

import numpy as np
import pytest

from strokecast.classifier import (
    ClassificationResult,
    WriterScores,
    classify_writer,
    combine_channels,
    combine_words,
    decide,
    fuse_sessions,
    score_writer,
    word_distortion,
)
from strokecast.constants import (
    DimensionMismatchError,
    EmptyEvidenceWarning,
    InsufficientDataError,
    UnknownWriterError,
)
from strokecast.domain.value_objects import Channel, Decision, Gender, SessionFusion, StrokeKind
from strokecast.gender_model import CELLS, Codebook, Provenance, WordModel
from strokecast.som import GridSpec, PrototypeSet
from strokecast.stroke_pipeline import FeatureStroke, extract_features, recording_features
from tests.conftest import SMALL_M, make_dataset

M = 4


def _codebook(word: str, gender: Gender, kind: StrokeKind, vectors: np.ndarray) -> Codebook:
    protos = PrototypeSet(GridSpec(vectors.shape[0], 1), vectors)
    provenance = Provenance(1, len(vectors), 0, "test")
    return Codebook(word, gender, kind, M, kind.feature_count, protos, provenance)


def _memorizing_model(ds, writer_id: str, word: str = "ALFA", offset: float = 5.0) -> WordModel:
    """Male codebooks hold the writer's own strokes; female ones are shifted copies."""
    feats = [recording_features(rec, M, 2) for _, rec in ds.recordings_for(writer_id, word)]
    books = {}
    for gender, kind in CELLS:
        vectors = np.vstack([f.of(kind) for f in feats])
        if gender is Gender.FEMALE:
            vectors = vectors + offset
        books[(gender, kind)] = _codebook(word, gender, kind, vectors)
    return WordModel(word, books)


class TestReductions:
    """Test session, channel and word reductions."""

    @pytest.mark.parametrize(
        ("strategy", "expected"),
        [
            (SessionFusion.SUM, 10.0),
            (SessionFusion.AVERAGE, 2.5),
            (SessionFusion.MAX, 4.0),
            (SessionFusion.MIN, 1.0),
        ],
    )
    def test_fuse_sessions(self, strategy, expected):
        assert fuse_sessions([2.0, 3.0, 4.0, 1.0], strategy) == expected

    def test_fuse_sessions_accepts_strategy_values(self):
        assert fuse_sessions([1, 2], "max") == 2.0

    def test_fuse_empty_sessions(self):
        with pytest.raises(InsufficientDataError):
            fuse_sessions([])

    def test_combine_channels(self):
        assert combine_channels(1.5, 2.25) == 3.75
        assert combine_channels(1.0, 2.0, weights=(2.0, 0.5)) == 3.0

    @pytest.mark.parametrize(
        ("down", "up"), [(-1.0, 1.0), (1.0, float("nan")), (float("inf"), 0.0)]
    )
    def test_combine_channels_rejects_bad_input(self, down, up):
        with pytest.raises(ValueError):
            combine_channels(down, up)

    def test_combine_words(self):
        assert combine_words([1.0, 2.0, 3.5]) == 6.5
        with pytest.raises(InsufficientDataError):
            combine_words([])


class TestWordDistortion:
    """Test per-codebook distortion sums."""

    def test_strokes_on_prototypes_have_zero_distortion(self):
        rng = np.random.default_rng(0)
        vectors = rng.normal(size=(3, M * 2))
        cb = _codebook("ALFA", Gender.MALE, StrokeKind.PEN_UP, vectors)
        strokes = [FeatureStroke(StrokeKind.PEN_UP, M, 2, v) for v in vectors]
        assert word_distortion(cb, strokes) == 0.0

    def test_sum_of_bmu_distances(self):
        vectors = np.zeros((2, M * 2))
        vectors[1] = 10.0
        cb = _codebook("ALFA", Gender.MALE, StrokeKind.PEN_UP, vectors)
        strokes = np.zeros((2, M * 2))
        strokes[0, 0] = 3.0
        strokes[1] = 10.0
        strokes[1, 1] = 14.0
        assert word_distortion(cb, strokes) == pytest.approx(7.0)

    def test_kind_mismatch_rejected(self):
        cb = _codebook("ALFA", Gender.MALE, StrokeKind.PEN_DOWN, np.zeros((2, M * 3)))
        with pytest.raises(DimensionMismatchError):
            word_distortion(cb, [FeatureStroke(StrokeKind.PEN_UP, M, 2, np.zeros(M * 2))])

    def test_dimension_mismatch_rejected(self):
        cb = _codebook("ALFA", Gender.MALE, StrokeKind.PEN_UP, np.zeros((2, M * 2)))
        with pytest.raises(DimensionMismatchError):
            word_distortion(cb, np.zeros((1, M * 3)))

    def test_empty_evidence_warns_and_contributes_zero(self):
        cb = _codebook("ALFA", Gender.MALE, StrokeKind.PEN_UP, np.zeros((2, M * 2)))
        with pytest.warns(EmptyEvidenceWarning):
            assert word_distortion(cb, []) == 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert word_distortion(cb, [], warn=False) == 0.0


class TestDecisions:
    """Test score_writer / decide / classify_writer."""

    def test_memorized_writer_is_attributed_male(self):
        ds = make_dataset({"m1": Gender.MALE, "f1": Gender.FEMALE})
        models = {"ALFA": _memorizing_model(ds, "m1")}
        result = classify_writer(models, ds, "m1", Channel.COMBINED, min_points=2)
        assert result.male_score == 0.0
        assert result.female_score > 0.0
        assert result.decision is Decision.MALE
        assert result.true_gender is Gender.MALE
        assert result.correct

    def test_identical_codebooks_tie(self):
        ds = make_dataset({"m1": Gender.MALE})
        model = _memorizing_model(ds, "m1", offset=0.0)
        result = classify_writer({"ALFA": model}, ds, "m1")
        assert result.decision is Decision.TIE
        assert not result.correct

    def test_combined_channel_decomposes_into_down_plus_up(self, tiny_dataset, tiny_models):
        for writer_id in tiny_dataset.writers:
            scores = score_writer(tiny_models, tiny_dataset, writer_id)
            down = decide(scores, Channel.DOWN_ONLY)
            up = decide(scores, Channel.UP_ONLY)
            both = decide(scores, Channel.COMBINED)
            assert both.male_score == down.male_score + up.male_score
            assert both.female_score == down.female_score + up.female_score

    def test_all_words_score_is_sum_of_word_scores(self, tiny_dataset, tiny_models):
        scores = score_writer(tiny_models, tiny_dataset, "w0001")
        per_word = [decide(scores, Channel.COMBINED, (w,)) for w in scores.words]
        fused = decide(scores, Channel.COMBINED)
        assert fused.male_score == pytest.approx(sum(r.male_score for r in per_word))
        assert fused.words == ("ALFA", "BETA")

    def test_session_strategies_relate(self, tiny_dataset, tiny_models):
        total = score_writer(tiny_models, tiny_dataset, "w0002", strategy=SessionFusion.SUM)
        mean = score_writer(tiny_models, tiny_dataset, "w0002", strategy=SessionFusion.AVERAGE)
        low = score_writer(tiny_models, tiny_dataset, "w0002", strategy=SessionFusion.MIN)
        high = score_writer(tiny_models, tiny_dataset, "w0002", strategy=SessionFusion.MAX)
        for key, value in total.scores.items():
            assert mean.scores[key] * 2 == pytest.approx(value)
            assert low.scores[key] <= mean.scores[key] <= high.scores[key]

    def test_records_cover_every_session_and_cell(self, tiny_dataset, tiny_models):
        scores = score_writer(tiny_models, tiny_dataset, "w0003", ["ALFA"])
        assert len(scores.records) == 2 * len(CELLS)
        assert {r.session_id for r in scores.records} == {1, 2}
        assert scores.stroke_counts[("ALFA", StrokeKind.PEN_DOWN)] == 2 * 4
        assert scores.stroke_counts[("ALFA", StrokeKind.PEN_UP)] == 2 * 3

    def test_summed_score_is_the_sum_of_session_distortions(self, tiny_dataset, tiny_models):
        for writer_id in tiny_dataset.writers:
            scores = score_writer(tiny_models, tiny_dataset, writer_id, strategy=SessionFusion.SUM)
            totals: dict = {}
            for r in scores.records:
                key = (r.word_id, r.gender, r.kind)
                totals[key] = totals.get(key, 0.0) + r.distortion
            assert set(totals) == set(scores.scores)
            for key, value in scores.scores.items():
                assert value == pytest.approx(totals[key])
            down = decide(scores, Channel.DOWN_ONLY)
            expected = sum(
                r.distortion
                for r in scores.records
                if r.gender is Gender.MALE and r.kind is StrokeKind.PEN_DOWN
            )
            assert down.male_score == pytest.approx(expected)

    def test_feature_bank_gives_identical_scores(self, tiny_dataset, tiny_models):
        bank = extract_features(tiny_dataset, SMALL_M, 2)
        direct = score_writer(tiny_models, tiny_dataset, "w0007")
        banked = score_writer(tiny_models, tiny_dataset, "w0007", bank=bank)
        assert dict(direct.scores) == dict(banked.scores)

    def test_training_writers_are_recognized(self, tiny_dataset, tiny_models):
        results = [
            classify_writer(tiny_models, tiny_dataset, w, Channel.COMBINED)
            for w in tiny_dataset.writers
        ]
        accuracy = sum(r.correct for r in results) / len(results)
        assert accuracy >= 0.75

    def test_unknown_writer(self, tiny_dataset, tiny_models):
        with pytest.raises(UnknownWriterError):
            score_writer(tiny_models, tiny_dataset, "nobody")

    def test_word_without_model(self, tiny_dataset, tiny_models):
        with pytest.raises(InsufficientDataError, match="no model"):
            score_writer(tiny_models, tiny_dataset, "w0001", ["GAMMA"])

    def test_writer_without_recording(self, tiny_models):
        ds = make_dataset({"m1": Gender.MALE}, words=("BETA",))
        with pytest.raises(InsufficientDataError, match="no recording"):
            score_writer(tiny_models, ds, "m1", ["ALFA"])

    def test_missing_pen_up_evidence(self):
        ds = make_dataset({"m1": Gender.MALE}, bs=(1, 1, 1, 1, 1, 1))
        model = _memorizing_model(make_dataset({"m1": Gender.MALE}), "m1")
        with pytest.warns(EmptyEvidenceWarning):
            scores = score_writer({"ALFA": model}, ds, "m1")
        with pytest.raises(InsufficientDataError):
            decide(scores, Channel.UP_ONLY)
        combined = decide(scores, Channel.COMBINED)
        down = decide(scores, Channel.DOWN_ONLY)
        assert combined.male_score == down.male_score


class TestClassificationResult:
    """Test result rows and tie semantics."""

    def test_from_scores_and_row(self):
        r = ClassificationResult.from_scores(
            "w1", Channel.UP_ONLY, ["ALFA", "BETA"], 2.0, 1.0, Gender.FEMALE
        )
        assert r.decision is Decision.FEMALE
        assert r.correct
        assert r.to_row() == {
            "writer_id": "w1",
            "channel": "up",
            "words": "ALFA;BETA",
            "male_score": 2.0,
            "female_score": 1.0,
            "decision": "F",
            "true_gender": "F",
        }

    def test_unlabelled_result_is_never_correct(self):
        r = ClassificationResult.from_scores("w1", Channel.COMBINED, ["A"], 1.0, 2.0)
        assert r.decision is Decision.MALE
        assert not r.correct
        assert r.to_row()["true_gender"] == ""


def _random_scores(rng: np.random.Generator, words: tuple[str, ...]) -> WriterScores:
    scores = {
        (w, g, k): float(rng.uniform(0.0, 100.0)) for w in words for g in Gender for k in StrokeKind
    }
    counts = {(w, k): 1 for w in words for k in StrokeKind}
    return WriterScores("w1", Gender.MALE, SessionFusion.SUM, words, scores, counts)


class TestDecisionInvariants:
    """Properties of decide() on random score tables."""

    WORDS = ("ALFA", "BETA", "GAMMA", "DELTA")

    def test_positive_scaling_keeps_the_decision(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            scores = _random_scores(rng, self.WORDS)
            c = 2.0 ** int(rng.integers(-6, 7))
            scaled = replace(scores, scores={k: v * c for k, v in scores.scores.items()})
            for channel in Channel:
                before = decide(scores, channel)
                after = decide(scaled, channel)
                assert after.decision is before.decision
                assert after.male_score == before.male_score * c

    def test_agreeing_word_never_flips_the_decision(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            scores = _random_scores(rng, self.WORDS)
            for channel in Channel:
                base = decide(scores, channel, self.WORDS[:2])
                for extra in self.WORDS[2:]:
                    word = decide(scores, channel, (extra,))
                    if base.decision is Decision.TIE or word.decision is not base.decision:
                        continue
                    grown = decide(scores, channel, (*self.WORDS[:2], extra))
                    assert grown.decision is base.decision

    def test_word_scores_add_up_under_any_split(self):
        rng = np.random.default_rng(10)
        scores = _random_scores(rng, self.WORDS)
        for channel in Channel:
            whole = decide(scores, channel)
            left = decide(scores, channel, self.WORDS[:1])
            right = decide(scores, channel, self.WORDS[1:])
            assert whole.male_score == pytest.approx(left.male_score + right.male_score)
            assert whole.female_score == pytest.approx(left.female_score + right.female_score)
