"""Seeded synthetic handwriting in SVC form.

Each word is a row of glyphs. Every glyph is drawn with one or more pen-down
strokes; consecutive pen-down strokes are joined by an in-air pen-up
transition. A pen-down stroke is a cubic Bezier curve with a sinusoidal
pressure profile, a pen-up transition is a quadratic Bezier bulging sideways
between the two endpoints.

Ten latent parameters drive one stroke: the eight control-point coordinates,
the pressure-profile skew and the bulge of the following pen-up transition.
For every (word, stroke) there is a shared template and a random unit
direction ``u``. Male writers are centred at ``+delta/2 * sigma_w * u`` and
female writers at ``-delta/2 * sigma_w * u``; each writer then draws
``sigma_w`` jitter once and each session adds ``sigma_s`` jitter. At
``delta == 0`` both genders are identically distributed.

The default vocabulary is a list of sixteen long Spanish words with their
glyph counts. The generated data are a property of this generator only; they
do not stand in for any measured corpus statistics.
"""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

from strokecast.common.serialization import config_digest, write_json
from strokecast.constants import ConfigError
from strokecast.domain.value_objects import (
    AL,
    AZ,
    BS,
    PR,
    TS,
    X,
    Y,
    Dataset,
    Gender,
    RecordingKey,
    WordRecording,
)
from strokecast.infrastructure.settings import STROKECAST_WORKERS
from strokecast.svc_io import save_dataset

if TYPE_CHECKING:
    from strokecast.application.experiment import ExperimentConfig
    from strokecast.stats import BinomialReport

_logger = logging.getLogger(__name__)

__all__: list[str] = [
    "CONFIG_NAME",
    "DEFAULT_WORDS",
    "GenderArchetype",
    "SweepPoint",
    "SynthConfig",
    "WordTemplate",
    "build_archetypes",
    "generate_dataset",
    "separation_sweep",
    "stroke_allocation",
]

CONFIG_NAME = "synth_config.json"

DEFAULT_WORDS: tuple[tuple[str, int], ...] = (
    ("BIODEGRADABLE", 12),
    ("DELEZNABLE", 10),
    ("DESAPROVECHAMIENTO", 18),
    ("DESBRIZNAR", 10),
    ("DESLUMBRAMIENTO", 15),
    ("DESPEDAZAMIENTO", 15),
    ("DESPRENDER", 10),
    ("ENGUALDRAPAR", 12),
    ("EXPRESIVIDAD", 12),
    ("IMPENETRABLE", 12),
    ("INEXPUGNABLE", 12),
    ("INFATIGABLE", 11),
    ("INGOBERNABLE", 12),
    ("MANSEDUMBRE", 11),
    ("ZAFARRANCHO", 11),
    ("ZARRAPASTROSA", 13),
)

# Latent parameter layout: 8 control coordinates, pressure skew, pen-up bulge.
_N_PARAMS = 10
_SKEW, _BULGE = 8, 9
_PARAM_SCALE = np.array([1.0] * 8 + [4.0, 2.0])

# Tablet geometry and fixed device readings.
_ORIGIN_X, _ORIGIN_Y, _GLYPH_SIZE = 1000.0, 5000.0, 800.0
_COORD_MAX, _PRESSURE_MAX = 20000, 1024
_TS_STEP = 10
_AZIMUTH, _ALTITUDE = 1350, 600
_DOWN_POINTS = (10, 30)
_UP_POINTS = (3, 8)

# SeedSequence stream tags.
_TEMPLATE_TAG, _WRITER_TAG, _SESSION_TAG = 1, 2, 3


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings. Every field round-trips through JSON."""

    words: tuple[tuple[str, int], ...] = DEFAULT_WORDS
    writers_per_gender: int = 171
    sessions: int = 4
    separation: float = 2.0
    writer_jitter: float = 0.05
    session_jitter: float = 0.02
    strokes_per_glyph: float = 1.5
    seed: int = 0

    def __post_init__(self) -> None:
        words = tuple((str(w), int(g)) for w, g in self.words)
        object.__setattr__(self, "words", words)
        if not words:
            raise ConfigError("synth config needs at least one word")
        names = [w for w, _ in words]
        if len(set(names)) != len(names):
            raise ConfigError("synth word ids must be unique")
        if any(not w or "/" in w for w in names):
            raise ConfigError("synth word ids must be non-empty file-name safe strings")
        if any(g < 1 for _, g in words):
            raise ConfigError("glyph counts must be >= 1")
        if self.writers_per_gender < 1:
            raise ConfigError("writers_per_gender must be >= 1")
        if self.sessions < 1:
            raise ConfigError("sessions must be >= 1")
        if self.separation < 0:
            raise ConfigError("separation must be >= 0")
        if self.writer_jitter < 0 or self.session_jitter < 0:
            raise ConfigError("jitter must be >= 0")
        if self.strokes_per_glyph < 1:
            raise ConfigError("strokes_per_glyph must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")

    @property
    def word_ids(self) -> list[str]:
        return [w for w, _ in self.words]

    @property
    def word_lengths(self) -> dict[str, int]:
        return dict(self.words)

    def to_dict(self) -> dict[str, Any]:
        return {
            "words": [[w, g] for w, g in self.words],
            "writers_per_gender": self.writers_per_gender,
            "sessions": self.sessions,
            "separation": self.separation,
            "writer_jitter": self.writer_jitter,
            "session_jitter": self.session_jitter,
            "strokes_per_glyph": self.strokes_per_glyph,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SynthConfig:
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown synth keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "words" in kwargs:
            try:
                kwargs["words"] = tuple((str(w), int(g)) for w, g in kwargs["words"])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"synth words must be [word, glyphs] pairs: {exc}") from exc
        return cls(**kwargs)

    def digest(self) -> str:
        return config_digest(self.to_dict())

    def save(self, path: str | Path) -> Path:
        return write_json(self.to_dict(), path)

    @classmethod
    def load(cls, path: str | Path) -> SynthConfig:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read synth config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"synth config {path} is not a JSON object")
        return cls.from_dict(data)


# ---------------------------------------------------------------------------
# Templates and archetypes
# ---------------------------------------------------------------------------


def stroke_allocation(glyphs: int, strokes_per_glyph: float) -> list[int]:
    """Pen-down strokes per glyph, spreading the fractional part evenly.

    Examples:
        >>> stroke_allocation(4, 1.5)
        [1, 2, 1, 2]
    """
    counts = [
        math.floor((g + 1) * strokes_per_glyph) - math.floor(g * strokes_per_glyph)
        for g in range(glyphs)
    ]
    return [max(1, c) for c in counts]


@dataclass(frozen=True, eq=False)
class WordTemplate:
    """Gender-neutral stroke layout of one word.

    Attributes:
        stroke_glyph: Glyph index of every pen-down stroke, in writing order.
        base: ``(S, 10)`` template parameters per stroke.
        direction: ``(S, 10)`` unit rows along which the genders separate.
    """

    word_id: str
    glyphs: int
    stroke_glyph: tuple[int, ...]
    base: np.ndarray = field(repr=False)
    direction: np.ndarray = field(repr=False)

    @property
    def strokes(self) -> int:
        return len(self.stroke_glyph)


def _word_template(cfg: SynthConfig, word_idx: int) -> WordTemplate:
    word, glyphs = cfg.words[word_idx]
    rng = np.random.default_rng([cfg.seed, _TEMPLATE_TAG, word_idx])
    stroke_glyph = tuple(
        g for g, count in enumerate(stroke_allocation(glyphs, cfg.strokes_per_glyph))
        for _ in range(count)
    )
    n = len(stroke_glyph)
    base = np.empty((n, _N_PARAMS))
    base[:, 0] = rng.uniform(0.0, 0.3, n)  # start x
    base[:, 1] = rng.uniform(0.0, 1.0, n)  # start y
    base[:, 2:6] = rng.uniform(0.0, 1.0, (n, 4))
    base[:, 6] = rng.uniform(0.7, 1.0, n)  # end x
    base[:, 7] = rng.uniform(0.0, 1.0, n)  # end y
    base[:, _SKEW] = 0.0
    base[:, _BULGE] = rng.uniform(-0.3, 0.3, n)
    direction = rng.standard_normal((n, _N_PARAMS))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return WordTemplate(word, glyphs, stroke_glyph, base, direction)


@dataclass(frozen=True, eq=False)
class GenderArchetype:
    """Latent centre of one gender: ``offsets[word]`` is an ``(S, 10)`` shift."""

    gender: Gender
    offsets: Mapping[str, np.ndarray] = field(repr=False)


def build_archetypes(
    cfg: SynthConfig, templates: Sequence[WordTemplate] | None = None
) -> dict[Gender, GenderArchetype]:
    """Male and female archetypes, mirror images around the shared template."""
    templates = templates or [_word_template(cfg, i) for i in range(len(cfg.words))]
    half = 0.5 * cfg.separation * cfg.writer_jitter
    sign = {Gender.MALE: 1.0, Gender.FEMALE: -1.0}
    return {
        gender: GenderArchetype(
            gender, {t.word_id: s * half * t.direction for t in templates}
        )
        for gender, s in sign.items()
    }


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _cubic(points: np.ndarray, t: np.ndarray) -> np.ndarray:
    s = 1.0 - t
    basis = np.column_stack((s**3, 3 * s**2 * t, 3 * s * t**2, t**3))
    return basis @ points


def _pen_down(params: np.ndarray, glyph: int, rng: np.random.Generator) -> np.ndarray:
    """Float ``(n, 3)`` x, y, pressure of one pen-down stroke."""
    n = int(rng.integers(_DOWN_POINTS[0], _DOWN_POINTS[1] + 1))
    u = np.linspace(0.0, 1.0, n)
    t = u * u * (3.0 - 2.0 * u)
    ctrl = params[:8].reshape(4, 2)
    xy = _cubic(ctrl, t)
    x = _ORIGIN_X + _GLYPH_SIZE * (glyph + xy[:, 0])
    y = _ORIGIN_Y + _GLYPH_SIZE * xy[:, 1]
    pressure = 500.0 + 300.0 * np.sin(np.pi * u ** math.exp(params[_SKEW]))
    return np.column_stack((x, y, pressure))


def _pen_up(
    start: np.ndarray, end: np.ndarray, bulge: float, rng: np.random.Generator
) -> np.ndarray:
    """Float ``(n, 2)`` interior points of the in-air move from ``start`` to ``end``."""
    n = int(rng.integers(_UP_POINTS[0], _UP_POINTS[1] + 1))
    t = np.linspace(0.0, 1.0, n + 2)[1:-1, None]
    chord = end - start
    control = (start + end) / 2.0 + bulge * np.array([-chord[1], chord[0]])
    return (1 - t) ** 2 * start + 2 * (1 - t) * t * control + t**2 * end


def _render(template: WordTemplate, params: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Assemble one execution as an ``(N, 7)`` integer SVC matrix."""
    blocks: list[np.ndarray] = []
    prev_end: np.ndarray | None = None
    prev_bulge = 0.0
    for j, glyph in enumerate(template.stroke_glyph):
        down = _pen_down(params[j], glyph, rng)
        if prev_end is not None:
            up = _pen_up(prev_end, down[0, :2], prev_bulge, rng)
            block = np.zeros((up.shape[0], 7))
            block[:, [X, Y]] = up
            blocks.append(block)
        block = np.zeros((down.shape[0], 7))
        block[:, [X, Y, PR]] = down
        block[:, BS] = 1
        blocks.append(block)
        prev_end = down[-1, :2]
        prev_bulge = float(params[j, _BULGE])

    data = np.rint(np.vstack(blocks)).astype(np.int64)
    data[:, [X, Y]] = np.clip(data[:, [X, Y]], 0, _COORD_MAX)
    data[:, PR] = np.clip(data[:, PR], 0, _PRESSURE_MAX) * data[:, BS]
    data[:, TS] = _TS_STEP * np.arange(data.shape[0])
    data[:, AZ] = _AZIMUTH
    data[:, AL] = _ALTITUDE
    return data


def _writer_recordings(
    cfg: SynthConfig,
    templates: Sequence[WordTemplate],
    archetype: GenderArchetype,
    writer_idx: int,
    writer_id: str,
) -> dict[RecordingKey, WordRecording]:
    out: dict[RecordingKey, WordRecording] = {}
    for word_idx, template in enumerate(templates):
        writer_rng = np.random.default_rng([cfg.seed, _WRITER_TAG, writer_idx, word_idx])
        latent = archetype.offsets[template.word_id] + cfg.writer_jitter * (
            writer_rng.standard_normal((template.strokes, _N_PARAMS))
        )
        for session in range(1, cfg.sessions + 1):
            rng = np.random.default_rng([cfg.seed, _SESSION_TAG, writer_idx, session, word_idx])
            z = latent + cfg.session_jitter * rng.standard_normal(latent.shape)
            params = template.base + _PARAM_SCALE * z
            out[(writer_id, session, template.word_id)] = WordRecording(
                template.word_id, _render(template, params, rng)
            )
    return out


def generate_dataset(
    cfg: SynthConfig,
    out_dir: str | Path | None = None,
    *,
    workers: int = STROKECAST_WORKERS,
    on_writer: Callable[[str], None] | None = None,
) -> Dataset:
    """Generate a labelled dataset; optionally write it as an SVC tree.

    Writers are ``w0001, w0002, ...`` with all males first. Every random
    draw comes from a stream keyed by ``(seed, writer, session, word)``, so
    the output is identical for any worker count.

    When ``out_dir`` is given the tree, ``manifest.csv`` and
    ``synth_config.json`` are written there.
    """
    templates = [_word_template(cfg, i) for i in range(len(cfg.words))]
    archetypes = build_archetypes(cfg, templates)
    genders = [Gender.MALE] * cfg.writers_per_gender + [Gender.FEMALE] * cfg.writers_per_gender
    width = max(4, len(str(len(genders))))
    writers = {f"w{i + 1:0{width}d}": g for i, g in enumerate(genders)}

    def _one(item: tuple[int, tuple[str, Gender]]) -> dict[RecordingKey, WordRecording]:
        idx, (writer_id, gender) = item
        recs = _writer_recordings(cfg, templates, archetypes[gender], idx, writer_id)
        if on_writer is not None:
            on_writer(writer_id)
        return recs

    recordings: dict[RecordingKey, WordRecording] = {}
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        for recs in executor.map(_one, enumerate(writers.items())):
            recordings.update(recs)
    ds = Dataset(writers=writers, recordings=recordings)
    _logger.info(
        "Generated %d writers x %d sessions x %d words (separation=%g)",
        len(writers),
        cfg.sessions,
        len(templates),
        cfg.separation,
    )
    if out_dir is not None:
        save_dataset(ds, out_dir)
        cfg.save(Path(out_dir) / CONFIG_NAME)
    return ds


# ---------------------------------------------------------------------------
# Separation sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepPoint:
    """Fused all-words accuracy of the combined channel at one separation.

    ``resubstitution`` is set when the point was scored on its own training
    writers because no disjoint split existed.
    """

    delta: float
    accuracy: float
    report: BinomialReport
    resubstitution: bool = False


def separation_sweep(
    cfg: SynthConfig,
    deltas: Iterable[float],
    experiment_cfg: ExperimentConfig | None = None,
) -> list[SweepPoint]:
    """Run the full train/classify protocol once per separation value.

    The generator seed and the experiment seed are shared by every point, so
    only ``delta`` changes between runs. With a single writer per gender no
    disjoint split exists; every point is then trained and scored on the same
    two writers and flagged as resubstitution.

    Args:
        cfg: Generator settings; its ``separation`` is replaced per point.
        deltas: At least two separation values.
        experiment_cfg: Protocol settings. By default half the writers of
            each gender train and the other half test, over one trial.

    Raises:
        ConfigError: If fewer than two deltas are given.
    """
    from strokecast.application.experiment import (
        ExperimentConfig,
        run_experiment,
        run_resubstitution,
    )

    values = [float(d) for d in deltas]
    if len(values) < 2:
        raise ConfigError("a separation sweep needs at least two deltas")
    if experiment_cfg is None:
        train = max(1, cfg.writers_per_gender // 2)
        experiment_cfg = ExperimentConfig(
            train_per_gender=train,
            test_per_gender=max(1, cfg.writers_per_gender - train),
            trials=1,
            seed=cfg.seed,
        )
    resubstitution = cfg.writers_per_gender < 2

    points: list[SweepPoint] = []
    for delta in values:
        point_cfg = replace(experiment_cfg, synth=replace(cfg, separation=delta), data_root=None)
        if resubstitution:
            report = run_resubstitution(point_cfg)
        else:
            report = run_experiment(point_cfg).fused_report()
        points.append(SweepPoint(delta, report.rate, report, resubstitution))
        _logger.info("separation %g: fused accuracy %.3f (n=%d)", delta, report.rate, report.n)
    return points
