"""Rendering of rate tables and experiment outputs.

Tables are assembled as :class:`pandas.DataFrame` objects and written as CSV
or as a fixed-width plaintext rendering in which a trailing ``*`` marks a
rate that is *not* statistically significant.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import TYPE_CHECKING, Any

import pandas as pd

from strokecast.classifier import CLASSIFICATION_COLUMNS
from strokecast.common.serialization import write_json
from strokecast.stats import BINOMIAL_COLUMNS

if TYPE_CHECKING:
    from strokecast.application.experiment import ExperimentResult, RateTable

_logger = logging.getLogger(__name__)

__all__: list[str] = [
    "CHANNEL_TITLES",
    "format_rate_table",
    "rate_table_frame",
    "records_frame",
    "write_experiment_outputs",
    "write_records_csv",
]

CHANNEL_TITLES: dict[str, str] = {
    "down": "Classification rates. Pen-down strokes only",
    "up": "Classification rates. Pen-up strokes only",
    "combined": "Classification rates. Combination of pen-down and pen-up strokes",
}


def rate_table_frame(table: RateTable) -> pd.DataFrame:
    """Rates plus one ``<column>_significant`` flag column per rate column."""
    rates = table.to_frame()
    flags = table.significance_frame().add_suffix("_significant")
    return pd.concat([rates, flags], axis=1)


def format_rate_table(table: RateTable, *, decimals: int = 1) -> str:
    """Plaintext rendering in percent, ``*`` after non-significant cells."""
    frame = table.to_frame() * 100.0
    flags = table.significance_frame()
    cells = frame.map(lambda v: f"{v:.{decimals}f}")
    cells = cells.where(flags, cells + "*")
    cells.columns = [c.replace("TRIAL ", "T") for c in cells.columns]
    title = CHANNEL_TITLES.get(table.channel.value, table.channel.value)
    body = cells.to_string(justify="right")
    footer = (
        f"* not significant: rate below {table.r_min * 100:.2f}% "
        f"(k_min={table.k_min} of n={table.n})"
    )
    return f"{title}\n{body}\n{footer}\n"


def records_frame(rows: Iterable[Mapping[str, Any]], columns: Iterable[str] | None = None) -> pd.DataFrame:
    frame = pd.DataFrame(list(rows))
    if columns is not None:
        frame = frame.reindex(columns=list(columns))
    return frame


def write_records_csv(
    rows: Iterable[Mapping[str, Any]], path: str | Path, columns: Iterable[str] | None = None
) -> Path:
    fp = Path(path)
    fp.parent.mkdir(parents=True, exist_ok=True)
    records_frame(rows, columns).to_csv(fp, index=False)
    return fp


def write_experiment_outputs(result: ExperimentResult, out_dir: str | Path) -> dict[str, Path]:
    """Write every experiment artifact into ``out_dir``.

    Files: ``config.json``, ``rates_<channel>.csv``, ``tables.txt``,
    ``binomial.csv``, ``classifications.csv`` and ``summary.json``.

    Returns:
        dict: Artifact name to written path.
    """
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {"config": write_json(result.config.to_dict(), root / "config.json")}

    rendered: list[str] = []
    for channel, table in result.tables.items():
        fp = root / f"rates_{channel.value}.csv"
        rate_table_frame(table).to_csv(fp, float_format="%.6f")
        written[f"rates_{channel.value}"] = fp
        rendered.append(format_rate_table(table))
    tables_path = root / "tables.txt"
    tables_path.write_text("\n".join(rendered), encoding="utf-8")
    written["tables"] = tables_path

    written["binomial"] = write_records_csv(
        result.reports(), root / "binomial.csv", ("channel", "words", "trial", *BINOMIAL_COLUMNS)
    )
    written["classifications"] = write_records_csv(
        result.classifications(),
        root / "classifications.csv",
        ("trial", *CLASSIFICATION_COLUMNS),
    )
    written["summary"] = write_json(result.summary(), root / "summary.json")
    _logger.info("Wrote %d experiment artifacts to %s", len(written), root)
    return written
