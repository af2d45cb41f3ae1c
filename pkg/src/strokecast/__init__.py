"""Strokecast: gender classification from online handwriting.

Strokecast reads pen-tablet recordings in the SVC text format, splits every
word into pen-down and pen-up strokes, turns each stroke into a fixed-length
feature vector and learns one self-organizing map codebook per word, gender
and stroke kind. A writer is attributed the gender whose codebooks quantize
their strokes with the smaller total distortion; rates are tested against
chance with an exact binomial tail.

Key Features:
    * **SVC I/O**: Strict parser and writer, dataset trees with a manifest
    * **Stroke Pipeline**: Run-length segmentation, resampling, z-normalization
    * **Batch SOM**: Hexagonal grid, linear initialization, rough/fine schedule
    * **Codebooks**: Versioned, checksummed text files per (word, gender, kind)
    * **Experiments**: Seeded multi-trial protocol with rate tables and reports
    * **Synthetic Data**: Seeded generator with a tunable gender separation

Examples:
    Generate data, train on every writer and classify one of them:

        >>> from strokecast import SynthConfig, generate_dataset, build_model_set, classify_writer
        >>> ds = generate_dataset(SynthConfig(writers_per_gender=10, seed=1))
        >>> models = build_model_set(ds, ds.words(), seed=1)
        >>> result = classify_writer(models, ds, "w0001")

    Significance of 165 correct decisions out of 242:

        >>> from strokecast import binomial_report
        >>> binomial_report(242, 165).significant
        True
"""

__version__ = "0.4.0"

from strokecast.application.experiment import (
    ExperimentConfig,
    ExperimentResult,
    RateTable,
    load_experiment_config,
    run_experiment,
    run_resubstitution,
    run_trial,
)
from strokecast.classifier import (
    ClassificationResult,
    classify_writer,
    combine_channels,
    combine_words,
    decide,
    fuse_sessions,
    score_writer,
    word_distortion,
)
from strokecast.domain.value_objects import (
    Channel,
    Dataset,
    Decision,
    Gender,
    PenSample,
    SessionFusion,
    StrokeKind,
    WordRecording,
)
from strokecast.gender_model import (
    Codebook,
    SomConfig,
    WordModel,
    build_codebook,
    build_model_set,
    build_word_model,
    load_model_set,
    save_model_set,
)
from strokecast.som import GridSpec, TrainingSchedule, plan_grid, train
from strokecast.stats import (
    BinomialReport,
    binomial_report,
    binomial_sf,
    evaluate_rates,
    min_significant_rate,
    pearson,
)
from strokecast.stroke_pipeline import extract_features, resample, segment, to_feature_stroke
from strokecast.svc_io import load_dataset, parse_svc, save_dataset, write_svc
from strokecast.synth import SynthConfig, generate_dataset, separation_sweep

__all__ = [
    "BinomialReport",
    "Channel",
    "ClassificationResult",
    "Codebook",
    "Dataset",
    "Decision",
    "ExperimentConfig",
    "ExperimentResult",
    "Gender",
    "GridSpec",
    "PenSample",
    "RateTable",
    "SessionFusion",
    "SomConfig",
    "StrokeKind",
    "SynthConfig",
    "TrainingSchedule",
    "WordModel",
    "WordRecording",
    "binomial_report",
    "binomial_sf",
    "build_codebook",
    "build_model_set",
    "build_word_model",
    "classify_writer",
    "combine_channels",
    "combine_words",
    "decide",
    "evaluate_rates",
    "extract_features",
    "fuse_sessions",
    "generate_dataset",
    "load_dataset",
    "load_experiment_config",
    "load_model_set",
    "min_significant_rate",
    "parse_svc",
    "pearson",
    "plan_grid",
    "resample",
    "run_experiment",
    "run_resubstitution",
    "run_trial",
    "save_dataset",
    "save_model_set",
    "score_writer",
    "segment",
    "separation_sweep",
    "to_feature_stroke",
    "train",
    "word_distortion",
    "write_svc",
]
