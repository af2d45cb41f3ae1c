"""Deterministic self-organizing map on a hexagonal sheet lattice.

The map is sized from the data (:func:`plan_grid`), initialized on the plane
of the two leading principal components (:func:`init_linear`) and trained in
two phases, rough then fine, with a Gaussian neighbourhood whose width
decreases linearly inside each phase (:func:`train`).

Batch training follows the Voronoi-set formulation: every epoch assigns each
sample to its best-matching unit, accumulates per-unit sums with a sparse
assignment matrix, and replaces each prototype by the neighbourhood-weighted
mean of those sums. Cost per epoch is linear in the number of samples.

Unit ``(r, c)`` of a ``rows x cols`` grid has index ``r * cols + c`` and sits
at ``(c + 0.5 * (r % 2), r * sqrt(3) / 2)`` in the plane, so every interior
unit has six neighbours at distance 1.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Any

import numpy as np
from scipy.sparse import csr_matrix
from scipy.spatial.distance import cdist

from strokecast.common.serialization import config_digest
from strokecast.constants import (
    ConfigError,
    DimensionMismatchError,
    InsufficientDataError,
)
from strokecast.domain.value_objects import TrainingMode
from strokecast.infrastructure.settings import STROKECAST_TARGET_UNITS

_logger = logging.getLogger(__name__)

__all__: list[str] = [
    "GridSpec",
    "PrototypeSet",
    "TrainingSchedule",
    "TrainingTrace",
    "bmu",
    "bmu_many",
    "hex_distance",
    "init_linear",
    "plan_grid",
    "quantization_error",
    "train",
    "train_traced",
]

MIN_RATIO = 1.0
MAX_RATIO = 5.0
UNIT_TOLERANCE = 0.2
_NOISE_SCALE = 1e-3


def _round_half_up(value: float) -> int:
    return math.floor(value + 0.5)


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Hexagonal sheet lattice of ``rows x cols`` units."""

    rows: int
    cols: int
    topology: str = "hexagonal"

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ConfigError(f"grid sides must be >= 1, got {self.rows}x{self.cols}")
        if self.topology != "hexagonal":
            raise ConfigError(f"unsupported topology {self.topology!r}")

    @property
    def units(self) -> int:
        return self.rows * self.cols

    def position(self, unit: int) -> tuple[int, int]:
        """``(row, col)`` of a unit index."""
        if not 0 <= unit < self.units:
            raise IndexError(f"unit {unit} out of range for {self.rows}x{self.cols} grid")
        return divmod(unit, self.cols)

    def coordinates(self) -> np.ndarray:
        """Plane embedding of every unit, shape ``(units, 2)``."""
        return _hex_coordinates(self.rows, self.cols)

    def unit_distances(self) -> np.ndarray:
        """Pairwise lattice distances, shape ``(units, units)``."""
        return _hex_distances(self.rows, self.cols)


@lru_cache(maxsize=64)
def _hex_coordinates(rows: int, cols: int) -> np.ndarray:
    r, c = np.divmod(np.arange(rows * cols), cols)
    coords = np.column_stack((c + 0.5 * (r % 2), r * math.sqrt(3.0) / 2.0))
    coords.setflags(write=False)
    return coords


@lru_cache(maxsize=64)
def _hex_distances(rows: int, cols: int) -> np.ndarray:
    coords = _hex_coordinates(rows, cols)
    dist = cdist(coords, coords)
    dist.setflags(write=False)
    return dist


def hex_distance(u: int, v: int, grid: GridSpec) -> float:
    """Euclidean distance between two units in the hexagonal embedding.

    Examples:
        >>> g = GridSpec(2, 2)
        >>> hex_distance(0, 1, g), round(hex_distance(0, 2, g), 12)
        (1.0, 1.0)

    Raises:
        IndexError: If either index is outside the grid.
    """
    r1, c1 = grid.position(u)
    r2, c2 = grid.position(v)
    dx = (c1 + 0.5 * (r1 % 2)) - (c2 + 0.5 * (r2 % 2))
    dy = (r1 - r2) * math.sqrt(3.0) / 2.0
    return math.hypot(dx, dy)


def _as_matrix(data: Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=np.float64)
    except ValueError as exc:
        raise DimensionMismatchError(f"data vectors differ in dimension: {exc}") from None
    if arr.ndim == 1 and arr.size:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-D vector list, got shape {arr.shape}")
    return arr


def _top_eigen(data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and eigenvectors of the population covariance."""
    centred = data - data.mean(axis=0)
    cov = centred.T @ centred / data.shape[0]
    values, vectors = np.linalg.eigh(cov)
    order = np.argsort(values)[::-1]
    values = np.clip(values[order], 0.0, None)
    vectors = vectors[:, order]
    # sign convention: largest-magnitude component positive
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return values, vectors * signs


def plan_grid(
    data: Sequence[Sequence[float]] | np.ndarray,
    target_units: int = STROKECAST_TARGET_UNITS,
) -> GridSpec:
    """Choose grid sides around ``target_units`` from the data's spread.

    The side ratio ``rows / cols`` follows ``sqrt(l1 / l2)`` of the two
    largest covariance eigenvalues, clamped to ``[1, 5]``; ``rows`` and
    ``cols`` are ``sqrt(T * ratio)`` and ``sqrt(T / ratio)`` rounded half up.
    When the product misses ``T`` by more than 20% the longer side is
    recomputed as ``round(T / cols)``. Fewer than two vectors or zero spread
    give a square grid.

    Raises:
        ConfigError: If ``target_units < 4``.
    """
    if target_units < 4:
        raise ConfigError(f"target_units must be >= 4, got {target_units}")
    arr = _as_matrix(data)
    ratio = 1.0
    if arr.shape[0] >= 2:
        values, _ = _top_eigen(arr)
        l1 = float(values[0])
        l2 = float(values[1]) if values.size > 1 else 0.0
        if l1 > 0.0:
            ratio = MAX_RATIO if l2 <= l1 * 1e-12 else math.sqrt(l1 / l2)
    ratio = min(max(ratio, MIN_RATIO), MAX_RATIO)

    rows = max(1, _round_half_up(math.sqrt(target_units * ratio)))
    cols = max(1, _round_half_up(math.sqrt(target_units / ratio)))
    low, high = target_units * (1 - UNIT_TOLERANCE), target_units * (1 + UNIT_TOLERANCE)
    if not low <= rows * cols <= high:
        rows = max(1, _round_half_up(target_units / cols))
    if not low <= rows * cols <= high:
        rows, cols = target_units, 1
    _logger.debug("Planned %dx%d grid (ratio %.3f, target %d)", rows, cols, ratio, target_units)
    return GridSpec(rows, cols)


# ---------------------------------------------------------------------------
# Prototypes
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PrototypeSet:
    """Trained or initial prototypes, one row per grid unit."""

    grid: GridSpec
    prototypes: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        protos = np.array(self.prototypes, dtype=np.float64, copy=True)
        if protos.ndim != 2 or protos.shape[0] != self.grid.units:
            raise DimensionMismatchError(
                f"expected {self.grid.units} prototype rows, got shape {protos.shape}"
            )
        if not np.isfinite(protos).all():
            raise ValueError("prototypes must be finite")
        protos.setflags(write=False)
        object.__setattr__(self, "prototypes", protos)

    @property
    def dim(self) -> int:
        return int(self.prototypes.shape[1])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PrototypeSet):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.prototypes, other.prototypes)

    __hash__ = None  # type: ignore[assignment]


def init_linear(
    data: Sequence[Sequence[float]] | np.ndarray, grid: GridSpec, seed: int = 0
) -> PrototypeSet:
    """Spread prototypes over the plane of the two principal components.

    The longer grid side runs along the first component and the shorter one
    along the second, each mapped to ``[-2 sigma, +2 sigma]`` around the data mean. Directions
    the data does not span are replaced by seeded random directions
    orthogonal to the spanned ones, with a spread of ``1e-3`` times the
    leading standard deviation.
    """
    arr = _as_matrix(data)
    if arr.shape[0] == 0:
        raise InsufficientDataError("cannot initialize a map from empty data")
    n, dim = arr.shape
    mean = arr.mean(axis=0)
    if n >= 2:
        values, vectors = _top_eigen(arr)
    else:
        values, vectors = np.zeros(dim), np.eye(dim)

    wanted = min(2, dim)
    sigma1 = math.sqrt(values[0]) if values[0] > 0 else 0.0
    noise_sigma = _NOISE_SCALE * (sigma1 if sigma1 > 0 else 1.0)
    rng = np.random.default_rng(seed)
    directions: list[np.ndarray] = []
    sigmas: list[float] = []
    for k in range(wanted):
        if values[k] > values[0] * 1e-12 and values[k] > 0:
            directions.append(vectors[:, k])
            sigmas.append(math.sqrt(values[k]))
            continue
        vec = rng.standard_normal(dim)
        for d in directions:
            vec -= (vec @ d) * d
        norm = np.linalg.norm(vec)
        vec = vec / norm if norm > 0 else np.eye(dim)[k]
        directions.append(vec)
        sigmas.append(noise_sigma)

    def _axis(size: int) -> np.ndarray:
        return np.linspace(-1.0, 1.0, size) if size > 1 else np.zeros(1)

    r, c = np.divmod(np.arange(grid.units), grid.cols)
    long_side = _axis(grid.rows)[r] if grid.rows >= grid.cols else _axis(grid.cols)[c]
    short_side = _axis(grid.cols)[c] if grid.rows >= grid.cols else _axis(grid.rows)[r]
    protos = np.tile(mean, (grid.units, 1))
    protos += np.outer(2.0 * sigmas[0] * long_side, directions[0])
    if wanted > 1:
        protos += np.outer(2.0 * sigmas[1] * short_side, directions[1])
    return PrototypeSet(grid, protos)


# ---------------------------------------------------------------------------
# Training schedule
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainingSchedule:
    """Two-phase (rough, fine) training plan.

    Neighbourhood widths are in lattice-distance units. ``None`` widths are
    derived from the grid by :meth:`resolve`: rough phase from
    ``max(rows, cols) / 4`` down to ``max(rows, cols) / 16`` (both at least 1)
    and fine phase from the rough end down to 1. The learning rates apply to
    sequential mode only.
    """

    rough_epochs: int = 40
    fine_epochs: int = 200
    rough_sigma: tuple[float, float] | None = None
    fine_sigma: tuple[float, float] | None = None
    mode: TrainingMode = TrainingMode.BATCH
    rough_alpha: tuple[float, float] = (0.5, 0.05)
    fine_alpha: tuple[float, float] = (0.05, 0.01)

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", TrainingMode(self.mode))
        for name in ("rough_sigma", "fine_sigma"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, (float(value[0]), float(value[1])))
        for name in ("rough_alpha", "fine_alpha"):
            value = getattr(self, name)
            object.__setattr__(self, name, (float(value[0]), float(value[1])))

        if self.rough_epochs < 0 or self.fine_epochs < 0:
            raise ConfigError("epoch counts must be >= 0")
        if self.total_epochs < 1:
            raise ConfigError("schedule needs at least one epoch")
        widths = [w for pair in (self.rough_sigma, self.fine_sigma) if pair for w in pair]
        if any(w <= 0 for w in widths):
            raise ConfigError("neighbourhood widths must be > 0")
        if self.rough_sigma and self.rough_sigma[0] < self.rough_sigma[1]:
            raise ConfigError("rough_sigma must be non-increasing")
        if self.fine_sigma and self.fine_sigma[0] < self.fine_sigma[1]:
            raise ConfigError("fine_sigma must be non-increasing")
        if self.rough_sigma and self.fine_sigma and self.rough_sigma[1] < self.fine_sigma[0]:
            raise ConfigError("fine phase must not widen the neighbourhood")
        for pair in (self.rough_alpha, self.fine_alpha):
            if not all(0 < a <= 1 for a in pair):
                raise ConfigError("learning rates must lie in (0, 1]")

    @property
    def total_epochs(self) -> int:
        return self.rough_epochs + self.fine_epochs

    def resolve(self, grid: GridSpec) -> TrainingSchedule:
        """Fill missing neighbourhood widths from the grid size."""
        big = max(grid.rows, grid.cols)
        rough_end = max(big / 16.0, 1.0)
        rough = self.rough_sigma or (max(big / 4.0, rough_end), rough_end)
        fine = self.fine_sigma or (rough[1], 1.0)
        return replace(self, rough_sigma=rough, fine_sigma=fine)

    def sigmas(self, grid: GridSpec) -> np.ndarray:
        """Per-epoch neighbourhood widths, rough phase first."""
        resolved = self.resolve(grid)
        assert resolved.rough_sigma is not None and resolved.fine_sigma is not None
        return np.concatenate(
            (
                np.linspace(*resolved.rough_sigma, self.rough_epochs),
                np.linspace(*resolved.fine_sigma, self.fine_epochs),
            )
        )

    def alphas(self) -> np.ndarray:
        return np.concatenate(
            (
                np.linspace(*self.rough_alpha, self.rough_epochs),
                np.linspace(*self.fine_alpha, self.fine_epochs),
            )
        )

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["mode"] = self.mode.value
        for key in ("rough_sigma", "fine_sigma", "rough_alpha", "fine_alpha"):
            if data[key] is not None:
                data[key] = list(data[key])
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TrainingSchedule:
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown schedule keys: {sorted(unknown)}")
        kwargs = dict(data)
        for key in ("rough_sigma", "fine_sigma", "rough_alpha", "fine_alpha"):
            if kwargs.get(key) is not None:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    def digest(self) -> str:
        """Short stable hash of the schedule, used for provenance."""
        return config_digest(self.to_dict())


# ---------------------------------------------------------------------------
# Quantization
# ---------------------------------------------------------------------------


def bmu_many(
    protos: PrototypeSet, data: Sequence[Sequence[float]] | np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Best-matching unit and Euclidean distance for every row of ``data``.

    Ties resolve to the lowest unit index.
    """
    arr = _as_matrix(data)
    if arr.shape[0] == 0:
        return np.empty(0, dtype=np.intp), np.empty(0, dtype=np.float64)
    if arr.shape[1] != protos.dim:
        raise DimensionMismatchError(
            f"vector dimension {arr.shape[1]} does not match prototypes ({protos.dim})"
        )
    dist = cdist(arr, protos.prototypes)
    idx = np.argmin(dist, axis=1)
    return idx, dist[np.arange(arr.shape[0]), idx]


def bmu(protos: PrototypeSet, v: Sequence[float] | np.ndarray) -> tuple[int, float]:
    """Nearest prototype to ``v`` as ``(unit index, distance)``.

    Examples:
        >>> ps = PrototypeSet(GridSpec(1, 2), [[0.0, 0.0], [10.0, 10.0]])
        >>> unit, dist = bmu(ps, [1.0, 1.0])
        >>> unit, round(dist, 6)
        (0, 1.414214)
    """
    vec = np.asarray(v, dtype=np.float64)
    if vec.ndim != 1:
        raise DimensionMismatchError(f"expected a single vector, got shape {vec.shape}")
    idx, dist = bmu_many(protos, vec.reshape(1, -1))
    return int(idx[0]), float(dist[0])


def quantization_error(protos: PrototypeSet, data: Sequence[Sequence[float]] | np.ndarray) -> float:
    """Mean BMU distance over ``data``."""
    arr = _as_matrix(data)
    if arr.shape[0] == 0:
        raise InsufficientDataError("quantization error of empty data is undefined")
    _, dist = bmu_many(protos, arr)
    return float(dist.mean())


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainingTrace:
    """Per-epoch diagnostics of one training run.

    ``epoch_qe[i]`` is the quantization error of the prototypes entering
    epoch ``i``; ``final_qe`` is measured after the last epoch.
    """

    sigmas: tuple[float, ...]
    epoch_qe: tuple[float, ...]
    initial_qe: float
    final_qe: float


def _batch_assign(data: np.ndarray, protos: np.ndarray, data_sq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # ||x - m||^2 = ||x||^2 - 2 x.m + ||m||^2
    d2 = np.einsum("ij,ij->i", protos, protos)[None, :] - 2.0 * (data @ protos.T)
    idx = np.argmin(d2, axis=1)
    qe = np.sqrt(np.clip(d2[np.arange(data.shape[0]), idx] + data_sq, 0.0, None))
    return idx, qe


def _batch_epoch(
    data: np.ndarray,
    protos: np.ndarray,
    idx: np.ndarray,
    unit_dist_sq: np.ndarray,
    sigma: float,
) -> np.ndarray:
    units = protos.shape[0]
    n = data.shape[0]
    assign = csr_matrix((np.ones(n), (idx, np.arange(n))), shape=(units, n))
    sums = assign @ data
    counts = np.asarray(assign.sum(axis=1)).ravel()
    kernel = np.exp(-unit_dist_sq / (2.0 * sigma * sigma))
    numer = kernel @ sums
    denom = kernel @ counts
    updated = protos.copy()
    live = denom > 0
    updated[live] = numer[live] / denom[live, None]
    return updated


def _sequential_epoch(
    data: np.ndarray,
    protos: np.ndarray,
    unit_dist_sq: np.ndarray,
    sigma: float,
    alpha: float,
    rng: np.random.Generator,
) -> np.ndarray:
    kernel = np.exp(-unit_dist_sq / (2.0 * sigma * sigma))
    for i in rng.permutation(data.shape[0]):
        x = data[i]
        winner = int(np.argmin(np.einsum("ij,ij->i", protos - x, protos - x)))
        protos += (alpha * kernel[winner])[:, None] * (x - protos)
    return protos


def _train(
    data: Sequence[Sequence[float]] | np.ndarray,
    grid: GridSpec,
    schedule: TrainingSchedule | None,
    seed: int,
    init: PrototypeSet | None,
    record: bool,
) -> tuple[PrototypeSet, TrainingTrace | None]:
    arr = _as_matrix(data)
    if arr.shape[0] == 0:
        raise InsufficientDataError("cannot train a map on empty data")
    schedule = schedule or TrainingSchedule()
    start = init if init is not None else init_linear(arr, grid, seed)
    if start.grid != grid:
        raise DimensionMismatchError(f"initial prototypes use grid {start.grid}, not {grid}")
    if start.dim != arr.shape[1]:
        raise DimensionMismatchError(
            f"data dimension {arr.shape[1]} does not match prototypes ({start.dim})"
        )

    sigmas = schedule.sigmas(grid)
    alphas = schedule.alphas()
    unit_dist_sq = grid.unit_distances() ** 2
    protos = np.array(start.prototypes, dtype=np.float64, copy=True)
    data_sq = np.einsum("ij,ij->i", arr, arr)
    rng = np.random.default_rng(seed)
    epoch_qe: list[float] = []

    for epoch, sigma in enumerate(sigmas.tolist()):
        if schedule.mode is TrainingMode.BATCH:
            idx, qe = _batch_assign(arr, protos, data_sq)
            if record:
                epoch_qe.append(float(qe.mean()))
            protos = _batch_epoch(arr, protos, idx, unit_dist_sq, sigma)
        else:
            if record:
                epoch_qe.append(float(_batch_assign(arr, protos, data_sq)[1].mean()))
            protos = _sequential_epoch(arr, protos, unit_dist_sq, sigma, float(alphas[epoch]), rng)

    result = PrototypeSet(grid, protos)
    trace = None
    if record:
        trace = TrainingTrace(
            sigmas=tuple(sigmas.tolist()),
            epoch_qe=tuple(epoch_qe),
            initial_qe=quantization_error(start, arr),
            final_qe=quantization_error(result, arr),
        )
    _logger.debug(
        "Trained %dx%d map on %d vectors (%s, %d epochs)",
        grid.rows,
        grid.cols,
        arr.shape[0],
        schedule.mode.value,
        schedule.total_epochs,
    )
    return result, trace


def train(
    data: Sequence[Sequence[float]] | np.ndarray,
    grid: GridSpec,
    schedule: TrainingSchedule | None = None,
    seed: int = 0,
    *,
    init: PrototypeSet | None = None,
) -> PrototypeSet:
    """Train a map over ``data``.

    Args:
        data: ``(n, dim)`` training vectors, ``n >= 1``.
        grid: Lattice to train.
        schedule: Epochs, neighbourhood widths and update mode; defaults to
            40 rough + 200 fine batch epochs.
        seed: Drives linear initialization noise and, in sequential mode,
            the per-epoch sample order.
        init: Starting prototypes; defaults to :func:`init_linear`.

    Returns:
        PrototypeSet: Bit-identical for identical inputs and seed.

    Raises:
        InsufficientDataError: If ``data`` is empty.
        DimensionMismatchError: If vectors differ in length or do not match
            ``init``.
    """
    result, _ = _train(data, grid, schedule, seed, init, record=False)
    return result


def train_traced(
    data: Sequence[Sequence[float]] | np.ndarray,
    grid: GridSpec,
    schedule: TrainingSchedule | None = None,
    seed: int = 0,
    *,
    init: PrototypeSet | None = None,
) -> tuple[PrototypeSet, TrainingTrace]:
    """Like :func:`train`, also returning per-epoch quantization errors."""
    result, trace = _train(data, grid, schedule, seed, init, record=True)
    assert trace is not None
    return result, trace
