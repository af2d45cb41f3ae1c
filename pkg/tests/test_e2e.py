"""End-to-end tests for installed-style Strokecast workflows."""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pandas as pd
import pytest

from strokecast.synth import SynthConfig
from tests.conftest import TINY_WORDS

_FAST_SOM = ["--target-units", "16", "--rough-epochs", "3", "--fine-epochs", "10"]


def _run(*args: str) -> subprocess.CompletedProcess[str]:
    return subprocess.run(
        [sys.executable, "-m", "strokecast", *args],
        check=False,
        capture_output=True,
        text=True,
    )


@pytest.mark.e2e
def test_stats_min_rate_e2e() -> None:
    """The module entry point answers the minimum-rate question."""
    result = _run("stats", "--n", "242", "--min-rate")

    assert result.returncode == 0, result.stderr
    assert result.stdout.strip() == "n=242 p<0.01: k_min=140 r_min=0.5785"


@pytest.mark.e2e
def test_usage_error_exit_code_e2e() -> None:
    result = _run("stats", "--n", "3", "--k", "9")

    assert result.returncode == 2
    assert "--k must not exceed --n" in result.stderr


@pytest.mark.e2e
def test_synth_train_classify_e2e(tmp_path: Path) -> None:
    """Generate an SVC tree, train a model set on it and classify every writer."""
    synth = SynthConfig(words=TINY_WORDS, writers_per_gender=4, sessions=2, separation=8.0, seed=6)
    synth_path = synth.save(tmp_path / "synth.json")
    data = tmp_path / "data"
    models = tmp_path / "models"
    decisions = tmp_path / "decisions.csv"

    result = _run("synth", "--out", str(data), "--config", str(synth_path), "--quiet")
    assert result.returncode == 0, result.stderr
    assert "Wrote 32 recordings of 8 writers" in result.stdout
    assert len(list(data.rglob("*.svc"))) == 32

    result = _run(
        "train",
        "--data",
        str(data),
        "--models",
        str(models),
        "--seed",
        "3",
        "--resample-points",
        "8",
        *_FAST_SOM,
        "--quiet",
    )
    assert result.returncode == 0, result.stderr
    assert (models / "models.json").is_file()
    assert sorted(p.name for p in (models / "BETA").glob("*.cb")) == [
        "F-down.cb",
        "F-up.cb",
        "M-down.cb",
        "M-up.cb",
    ]
    assert (models / "ALFA" / "M-down.cb").read_text(encoding="utf-8").startswith("STROKECAST-CB")

    result = _run(
        "classify",
        "--data",
        str(data),
        "--models",
        str(models),
        "--channel",
        "down",
        "--out",
        str(decisions),
        "--quiet",
    )
    assert result.returncode == 0, result.stderr
    assert result.stdout.startswith("n=8 k=")
    frame = pd.read_csv(decisions)
    assert set(frame["channel"]) == {"down"}
    assert sorted(frame["writer_id"]) == [f"w000{i}" for i in range(1, 9)]
    assert set(frame["true_gender"]) == {"M", "F"}


@pytest.mark.e2e
@pytest.mark.slow
def test_experiment_e2e(tmp_path: Path) -> None:
    """Run the experiment harness on generated writers and read its reports."""
    synth = SynthConfig(words=TINY_WORDS, writers_per_gender=6, sessions=2, separation=8.0, seed=8)
    synth_path = synth.save(tmp_path / "synth.json")
    config_path = tmp_path / "experiment.json"
    config_path.write_text(
        json.dumps({"train_per_gender": 3, "test_per_gender": 3, "trials": 2, "resample_points": 8}),
        encoding="utf-8",
    )
    out = tmp_path / "results"

    result = _run(
        "experiment",
        "--config",
        str(config_path),
        "--synth-config",
        str(synth_path),
        "--seed",
        "1",
        "--out",
        str(out),
        *_FAST_SOM,
    )

    assert result.returncode == 0, result.stderr
    assert "Classification rates. Pen-down strokes only" in result.stdout
    assert f"Results written to {out}" in result.stdout
    rates = pd.read_csv(out / "rates_combined.csv", index_col="word")
    assert list(rates.index) == ["ALFA", "BETA", "ONE WORD ONLY (AVERAGE)", "ALL WORDS"]
    assert rates["AVG"].between(0.0, 1.0).all()
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["trials"] == 2
    assert summary["test_writers"] == 6
    binomial = pd.read_csv(out / "binomial.csv")
    assert len(binomial) == 3 * 3 * 2
