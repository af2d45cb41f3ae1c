"""Command-line interface for training, classification and experiments.

Subcommands:

* ``synth``: write a synthetic SVC tree, manifest and generator config.
* ``train``: build the four codebooks of every word from all writers.
* ``classify``: classify every writer of a dataset with trained models.
* ``experiment``: run the multi-trial train/test protocol and write reports.
* ``stats``: binomial significance of ``k`` of ``n`` or the minimum
  significant rate.
* ``inspect``: dump the feature strokes of an SVC file or a codebook header.

Example usage::

    strokecast synth --out ./data --writers-per-gender 20 --seed 7
    strokecast train --data ./data --models ./models --seed 7
    strokecast classify --data ./data --models ./models --channel combined
    strokecast experiment --config exp.json --seed 7 --out ./results
    strokecast stats --n 242 --min-rate

Exit codes: 0 success, 2 configuration or usage error, 3 data error,
4 internal invariant failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from dataclasses import replace
from typing import Any

from tqdm import tqdm

from strokecast.application.experiment import ALL_WORDS, load_experiment_config, run_experiment
from strokecast.classifier import CLASSIFICATION_COLUMNS, classify_writer
from strokecast.common.reporting import write_experiment_outputs, write_records_csv
from strokecast.constants import (
    EXIT_CONFIG_ERROR,
    EXIT_DATA_ERROR,
    EXIT_OK,
    ConfigError,
    StrokecastError,
)
from strokecast.domain.value_objects import Channel, SessionFusion, TrainingMode
from strokecast.gender_model import (
    CELLS,
    SomConfig,
    build_model_set,
    load_codebook,
    load_model_set,
    read_model_index,
    save_model_set,
)
from strokecast.infrastructure.settings import (
    STROKECAST_MIN_POINTS,
    STROKECAST_P_THRESHOLD,
    STROKECAST_RESAMPLE_POINTS,
    STROKECAST_TARGET_UNITS,
    STROKECAST_WORKERS,
)
from strokecast.som import TrainingSchedule
from strokecast.stats import BinomialReport, binomial_report, evaluate_rates, min_significant_rate
from strokecast.stroke_pipeline import dump_feature_strokes, extract_features, segment, to_feature_stroke
from strokecast.svc_io import load_dataset, read_svc
from strokecast.synth import SynthConfig, generate_dataset

_logger = logging.getLogger(__name__)


def _positive_int(value: str) -> int:
    """Parse a strictly positive integer for count flags."""
    try:
        parsed = int(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("must be a positive integer") from exc
    if parsed <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return parsed


def _non_negative_int(value: str) -> int:
    try:
        parsed = int(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("must be a non-negative integer") from exc
    if parsed < 0:
        raise argparse.ArgumentTypeError("must be a non-negative integer")
    return parsed


def _probability(value: str) -> float:
    try:
        parsed = float(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("must be a number in (0, 1)") from exc
    if not 0.0 < parsed < 1.0:
        raise argparse.ArgumentTypeError("must be a number in (0, 1)")
    return parsed


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--verbose", "-v", action="store_true", help="Enable verbose/debug logging")
    p.add_argument(
        "--quiet",
        "-q",
        action="store_true",
        help="Suppress progress bars (useful for piped output)",
    )


def _add_data(p: argparse.ArgumentParser, *, required: bool = True) -> None:
    p.add_argument(
        "--data",
        required=required,
        help="Root of the SVC tree (<writer>/<session>/<word>.svc)",
    )
    p.add_argument(
        "--manifest",
        default=None,
        help="Writer manifest (default: <data>/manifest.csv)",
    )


def _add_som(p: argparse.ArgumentParser, *, defaults: bool) -> None:
    """SOM flags; ``defaults=False`` leaves them ``None`` so a config file wins."""
    p.add_argument(
        "--resample-points",
        dest="resample_points",
        type=_positive_int,
        default=STROKECAST_RESAMPLE_POINTS if defaults else None,
        help=f"Points per resampled stroke (default: {STROKECAST_RESAMPLE_POINTS})",
    )
    p.add_argument(
        "--min-points",
        dest="min_points",
        type=_positive_int,
        default=STROKECAST_MIN_POINTS if defaults else None,
        help=f"Shortest run kept as a stroke (default: {STROKECAST_MIN_POINTS})",
    )
    p.add_argument(
        "--target-units",
        dest="target_units",
        type=_positive_int,
        default=None,
        help=f"Approximate SOM units per codebook (default: {STROKECAST_TARGET_UNITS})",
    )
    p.add_argument("--rough-epochs", dest="rough_epochs", type=_non_negative_int, default=None)
    p.add_argument("--fine-epochs", dest="fine_epochs", type=_non_negative_int, default=None)
    p.add_argument(
        "--mode",
        choices=[m.value for m in TrainingMode],
        default=None,
        help="SOM training rule (default: batch)",
    )


def _add_workers(p: argparse.ArgumentParser, *, defaults: bool = True) -> None:
    p.add_argument(
        "--workers",
        type=_positive_int,
        default=STROKECAST_WORKERS if defaults else None,
        help=f"Number of worker threads (default: {STROKECAST_WORKERS})",
    )


def _build_parser() -> argparse.ArgumentParser:
    from strokecast import __version__

    p = argparse.ArgumentParser(
        prog="strokecast",
        description="Gender classification from online handwriting with per-gender SOM codebooks",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    # --- synth ---
    s = sub.add_parser("synth", help="Generate a synthetic SVC dataset")
    s.add_argument("--out", required=True, help="Output directory")
    s.add_argument("--config", default=None, help="Generator config (JSON)")
    s.add_argument("--seed", type=_non_negative_int, default=None)
    s.add_argument("--separation", type=float, default=None, help="Gender separation delta")
    s.add_argument("--writers-per-gender", dest="writers_per_gender", type=_positive_int, default=None)
    s.add_argument("--sessions", type=_positive_int, default=None)
    _add_workers(s)
    _add_common(s)

    # --- train ---
    t = sub.add_parser("train", help="Train four codebooks per word from every writer")
    _add_data(t)
    t.add_argument("--models", required=True, help="Output directory for the model set")
    t.add_argument("--seed", type=_non_negative_int, required=True)
    t.add_argument("--words", nargs="+", default=None, help="Words to model (default: all)")
    _add_som(t, defaults=True)
    _add_workers(t)
    _add_common(t)

    # --- classify ---
    c = sub.add_parser("classify", help="Classify every writer of a dataset")
    _add_data(c)
    c.add_argument("--models", required=True, help="Model set directory")
    c.add_argument("--channel", choices=[ch.value for ch in Channel], default=Channel.COMBINED.value)
    c.add_argument(
        "--strategy",
        choices=[s.value for s in SessionFusion],
        default=SessionFusion.SUM.value,
        help="Session fusion (default: sum)",
    )
    c.add_argument("--words", nargs="+", default=None, help="Words to use (default: all modelled)")
    c.add_argument("--out", default=None, help="Write per-writer decisions to this CSV")
    c.add_argument("--threshold", type=_probability, default=STROKECAST_P_THRESHOLD)
    _add_workers(c)
    _add_common(c)

    # --- experiment ---
    e = sub.add_parser("experiment", help="Run the multi-trial train/test protocol")
    e.add_argument("--config", default=None, help="Experiment config (JSON)")
    e.add_argument("--seed", type=_non_negative_int, required=True)
    e.add_argument("--out", required=True, help="Results directory")
    _add_data(e, required=False)
    e.add_argument("--synth-config", dest="synth_config", default=None, help="Generate data from this config")
    e.add_argument("--trials", type=_positive_int, default=None)
    e.add_argument("--train-per-gender", dest="train_per_gender", type=_positive_int, default=None)
    e.add_argument("--test-per-gender", dest="test_per_gender", type=_positive_int, default=None)
    e.add_argument("--words", nargs="+", default=None)
    e.add_argument("--channels", nargs="+", choices=[ch.value for ch in Channel], default=None)
    e.add_argument("--strategy", choices=[s.value for s in SessionFusion], default=None)
    e.add_argument("--threshold", dest="p_threshold", type=_probability, default=None)
    _add_som(e, defaults=False)
    _add_workers(e, defaults=False)
    _add_common(e)

    # --- stats ---
    st = sub.add_parser("stats", help="Binomial significance against a fair coin")
    st.add_argument("--n", type=_positive_int, required=True, help="Number of test writers")
    mode = st.add_mutually_exclusive_group(required=True)
    mode.add_argument("--k", type=_non_negative_int, help="Correctly classified writers")
    mode.add_argument("--min-rate", dest="min_rate", action="store_true", help="Print the minimum significant rate")
    st.add_argument("--threshold", type=_probability, default=STROKECAST_P_THRESHOLD)
    _add_common(st)

    # --- inspect ---
    i = sub.add_parser("inspect", help="Dump feature strokes or a codebook header")
    target = i.add_mutually_exclusive_group(required=True)
    target.add_argument("--svc", default=None, help="SVC file to segment and featurize")
    target.add_argument("--codebook", default=None, help="Codebook file to describe")
    i.add_argument("--resample-points", dest="resample_points", type=_positive_int, default=STROKECAST_RESAMPLE_POINTS)
    i.add_argument("--min-points", dest="min_points", type=_positive_int, default=STROKECAST_MIN_POINTS)
    _add_common(i)
    return p


def _parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    """Parse and validate command-line arguments."""
    p = _build_parser()
    args = p.parse_args(argv)
    if args.command == "stats" and args.k is not None and args.k > args.n:
        p.error("--k must not exceed --n")
    if args.command == "experiment" and args.data and args.synth_config:
        p.error("--data and --synth-config are mutually exclusive")
    return args


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _som_config(args: argparse.Namespace, base: SomConfig | None = None) -> SomConfig:
    base = base or SomConfig()
    schedule_changes: dict[str, Any] = {}
    if args.rough_epochs is not None:
        schedule_changes["rough_epochs"] = args.rough_epochs
    if args.fine_epochs is not None:
        schedule_changes["fine_epochs"] = args.fine_epochs
    if args.mode is not None:
        schedule_changes["mode"] = TrainingMode(args.mode)
    schedule: TrainingSchedule = replace(base.schedule, **schedule_changes)
    target = args.target_units if args.target_units is not None else base.target_units
    return SomConfig(target_units=target, schedule=schedule)


def _print_report(report: BinomialReport) -> None:
    verdict = "significant" if report.significant else "not significant"
    print(
        f"n={report.n} k={report.k} rate={report.rate:.4f} p={report.p_value:.3e} "
        f"({verdict} at p<{report.p_threshold:g}; r_min={report.r_min:.4f}, k_min={report.k_min})"
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_synth(args: argparse.Namespace) -> int:
    cfg = SynthConfig.load(args.config) if args.config else SynthConfig()
    changes = {
        "seed": args.seed,
        "separation": args.separation,
        "writers_per_gender": args.writers_per_gender,
        "sessions": args.sessions,
    }
    try:
        cfg = replace(cfg, **{k: v for k, v in changes.items() if v is not None})
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    with tqdm(
        total=2 * cfg.writers_per_gender, desc="Generating writers", unit="writer", disable=args.quiet
    ) as bar:
        ds = generate_dataset(cfg, args.out, workers=args.workers, on_writer=lambda _w: bar.update(1))
    print(f"Wrote {len(ds.recordings)} recordings of {len(ds.writers)} writers to {args.out}")
    return EXIT_OK


def _cmd_train(args: argparse.Namespace) -> int:
    som_config = _som_config(args)
    ds = load_dataset(args.data, args.manifest, workers=args.workers)
    words = args.words or ds.words()
    bank = extract_features(ds, args.resample_points, args.min_points, workers=args.workers)
    with tqdm(total=len(words) * len(CELLS), desc="Training codebooks", unit="codebook", disable=args.quiet) as bar:
        models = build_model_set(
            ds,
            words,
            args.resample_points,
            som_config,
            args.seed,
            min_points=args.min_points,
            bank=bank,
            workers=args.workers,
            on_codebook=lambda _cb: bar.update(1),
        )
    save_model_set(models, args.models, som_config=som_config, min_points=args.min_points, seed=args.seed)
    print(f"Trained {len(models) * len(CELLS)} codebooks for {len(models)} words into {args.models}")
    return EXIT_OK


def _cmd_classify(args: argparse.Namespace) -> int:
    index = read_model_index(args.models)
    models = load_model_set(args.models)
    min_points = int(index.get("min_points", STROKECAST_MIN_POINTS))
    M = int(index.get("resample_points", STROKECAST_RESAMPLE_POINTS))
    ds = load_dataset(args.data, args.manifest, workers=args.workers)
    bank = extract_features(ds, M, min_points, workers=args.workers)
    channel = Channel(args.channel)
    strategy = SessionFusion(args.strategy)
    results = []
    for writer_id in tqdm(sorted(ds.writers), desc="Classifying writers", unit="writer", disable=args.quiet):
        results.append(
            classify_writer(
                models,
                ds,
                writer_id,
                channel,
                args.words,
                strategy,
                bank=bank,
                min_points=min_points,
            )
        )
    if args.out:
        write_records_csv((r.to_row() for r in results), args.out, CLASSIFICATION_COLUMNS)
    _print_report(evaluate_rates(results, args.threshold))
    return EXIT_OK


def _cmd_experiment(args: argparse.Namespace) -> int:
    overrides: dict[str, Any] = {
        "data_root": args.data,
        "manifest": args.manifest,
        "train_per_gender": args.train_per_gender,
        "test_per_gender": args.test_per_gender,
        "trials": args.trials,
        "words": args.words,
        "channels": args.channels,
        "strategy": args.strategy,
        "resample_points": args.resample_points,
        "min_points": args.min_points,
        "p_threshold": args.p_threshold,
        "seed": args.seed,
        "workers": args.workers,
    }
    if args.synth_config:
        overrides["synth"] = SynthConfig.load(args.synth_config).to_dict()
    cfg = load_experiment_config(args.config, overrides)
    cfg = replace(cfg, som=_som_config(args, cfg.som))
    if cfg.synth is None and cfg.data_root is None:
        raise ConfigError("experiment needs --data, --synth-config or a config file naming a data source")

    total = cfg.trials * 2 * cfg.test_per_gender if cfg.test_per_gender else None
    with tqdm(total=total, desc="Scoring test writers", unit="writer", disable=args.quiet) as bar:
        result = run_experiment(cfg, progress=lambda _w: bar.update(1))
    written = write_experiment_outputs(result, args.out)
    if not args.quiet:
        print(written["tables"].read_text(encoding="utf-8"))
    for channel, table in result.tables.items():
        print(f"{channel.value}: all words {table.row(ALL_WORDS).mean():.4f}")
    print(f"Results written to {args.out}")
    return EXIT_OK


def _cmd_stats(args: argparse.Namespace) -> int:
    if args.min_rate:
        k_min, rate = min_significant_rate(args.n, args.threshold)
        reachable = "" if k_min <= args.n else " (unreachable)"
        print(f"n={args.n} p<{args.threshold:g}: k_min={k_min} r_min={rate:.4f}{reachable}")
    else:
        _print_report(binomial_report(args.n, args.k, args.threshold))
    return EXIT_OK


def _cmd_inspect(args: argparse.Namespace) -> int:
    if args.svc:
        rec = read_svc(args.svc)
        seg = segment(rec, args.min_points)
        strokes = sorted(seg.pen_down + seg.pen_up, key=lambda s: s.span[0])
        print(
            f"# {rec.word_id}: {len(rec)} samples, {len(seg.pen_down)} pen-down, "
            f"{len(seg.pen_up)} pen-up, {seg.dropped_count} dropped"
        )
        sys.stdout.write(dump_feature_strokes(to_feature_stroke(s, args.resample_points) for s in strokes))
        return EXIT_OK
    cb = load_codebook(args.codebook)
    grid = cb.protos.grid
    print(f"word: {cb.word_id}")
    print(f"gender: {cb.gender.value}")
    print(f"kind: {cb.kind.value}")
    print(f"M: {cb.M} F: {cb.F} dim: {cb.dim}")
    print(f"grid: {grid.rows}x{grid.cols} ({grid.units} units, {grid.topology})")
    print(f"trained on {cb.provenance.strokes} strokes from {cb.provenance.writers} writers")
    print(f"seed: {cb.provenance.seed} schedule: {cb.provenance.schedule}")
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "classify": _cmd_classify,
    "experiment": _cmd_experiment,
    "stats": _cmd_stats,
    "inspect": _cmd_inspect,
}


def main(argv: Sequence[str] | None = None) -> int:
    """Main CLI entry point."""
    args = _parse_args(argv)

    # --- Configure logging ---
    if args.verbose:
        logging.basicConfig(level=logging.DEBUG, format="%(name)s %(levelname)s: %(message)s")
    else:
        logging.basicConfig(level=logging.WARNING)

    try:
        return _COMMANDS[args.command](args)
    except StrokecastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        _logger.debug("%s failed", args.command, exc_info=True)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
