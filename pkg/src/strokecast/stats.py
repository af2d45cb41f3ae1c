"""Exact binomial significance testing of classification rates.

Under the null hypothesis a classifier attributes gender by a fair coin, so
the number ``k`` of correctly classified writers out of ``n`` follows
``Binomial(n, 0.5)``. Tails are accumulated in log space with
:func:`scipy.special.gammaln` and :func:`scipy.special.logsumexp`, which keeps
six or more significant digits far into the tail (p-values around 1e-9 at
``n = 242``).

A significance level is quoted as a confidence: "alpha = 99%" means a
p-value threshold of ``1e-2``. Reports store both.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import stats as sps
from scipy.special import gammaln, logsumexp

from strokecast.classifier import ClassificationResult
from strokecast.constants import DataError, InsufficientDataError, UndefinedCorrelationError
from strokecast.infrastructure.settings import STROKECAST_P_THRESHOLD

_logger = logging.getLogger(__name__)

__all__: list[str] = [
    "BINOMIAL_COLUMNS",
    "BinomialReport",
    "binomial_cdf",
    "binomial_report",
    "binomial_sf",
    "evaluate_rates",
    "k_from_rate",
    "min_significant_rate",
    "normal_approx_sf",
    "pearson",
]

BINOMIAL_COLUMNS: tuple[str, ...] = (
    "n",
    "k",
    "rate",
    "p_value",
    "threshold",
    "significant",
    "r_min",
    "k_min",
    "alpha",
    "normal_p_value",
)

_LOG2 = math.log(2.0)


def _check_nk(n: int, k: int) -> None:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0 <= k <= n:
        raise ValueError(f"k must lie in [0, {n}], got {k}")


def _log_pmf(n: int) -> np.ndarray:
    """``log P(X = j)`` for ``j = 0..n`` under ``Binomial(n, 0.5)``."""
    j = np.arange(n + 1, dtype=np.float64)
    return gammaln(n + 1.0) - gammaln(j + 1.0) - gammaln(n - j + 1.0) - n * _LOG2


def binomial_sf(n: int, k: int) -> float:
    """Exact ``P(X >= k)`` for ``X ~ Binomial(n, 0.5)``.

    Examples:
        >>> round(binomial_sf(2, 1), 12)
        0.75
        >>> binomial_sf(10, 10) == 0.5 ** 10
        True
    """
    _check_nk(n, k)
    if k == 0:
        return 1.0
    if k == n:
        return math.ldexp(1.0, -n)
    return float(min(1.0, math.exp(logsumexp(_log_pmf(n)[k:]))))


def binomial_cdf(n: int, k: int) -> float:
    """Exact ``P(X <= k)``; ``binomial_cdf(n, k - 1) + binomial_sf(n, k) == 1``."""
    _check_nk(n, k)
    if k == n:
        return 1.0
    if k == 0:
        return math.ldexp(1.0, -n)
    return float(min(1.0, math.exp(logsumexp(_log_pmf(n)[: k + 1]))))


def normal_approx_sf(n: int, k: int) -> float:
    """Continuity-corrected normal approximation of :func:`binomial_sf`.

    Diagnostic only: far in the tail it is off by orders of magnitude.
    """
    _check_nk(n, k)
    z = (k - 0.5 - n / 2.0) / math.sqrt(n / 4.0)
    return float(sps.norm.sf(z))


def min_significant_rate(
    n: int, p_threshold: float = STROKECAST_P_THRESHOLD
) -> tuple[int, float]:
    """Smallest ``k`` with ``binomial_sf(n, k) < p_threshold``, and ``k / n``.

    When even ``k = n`` is not significant the rate is unreachable and
    ``(n + 1, (n + 1) / n)`` is returned, so that no observed rate passes.

    Examples:
        >>> min_significant_rate(242, 0.01)[0]
        140
        >>> min_significant_rate(1, 0.6)
        (1, 1.0)
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 < p_threshold < 1.0:
        raise ValueError(f"p_threshold must lie in (0, 1), got {p_threshold}")
    # log P(X >= k) for every k, accumulated from the upper end
    log_tail = np.logaddexp.accumulate(_log_pmf(n)[::-1])[::-1]
    candidates = np.flatnonzero(log_tail < math.log(p_threshold))
    for k in candidates.tolist():
        # the scalar tail decides at the boundary
        if binomial_sf(n, k) < p_threshold:
            return k, k / n
    _logger.debug("no significant rate reachable for n=%d at p<%g", n, p_threshold)
    return n + 1, (n + 1) / n


def k_from_rate(rate: float, n: int) -> int:
    """Success count behind a reported rate: ``rate * n`` rounded half up."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate must lie in [0, 1], got {rate}")
    return min(n, int(math.floor(rate * n + 0.5)))


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson correlation coefficient, clipped to ``[-1, 1]``.

    Raises:
        ValueError: On unequal lengths or fewer than two pairs.
        UndefinedCorrelationError: If either sequence is constant.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"pearson needs two equal-length sequences, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise ValueError("pearson needs at least two pairs")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedCorrelationError("correlation is undefined for a constant sequence")
    xc = x - x.mean()
    yc = y - y.mean()
    r = float(np.dot(xc, yc) / math.sqrt(float(np.dot(xc, xc)) * float(np.dot(yc, yc))))
    return max(-1.0, min(1.0, r))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BinomialReport:
    """Significance of ``k`` successes out of ``n`` against a fair coin.

    ``significant`` holds iff ``p_value < p_threshold``, which is equivalent
    to ``k >= k_min``.
    """

    n: int
    k: int
    rate: float
    p_value: float
    p_threshold: float
    significant: bool
    k_min: int
    r_min: float
    normal_p_value: float | None = None

    @property
    def alpha(self) -> float:
        return 1.0 - self.p_threshold

    def to_row(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "k": self.k,
            "rate": self.rate,
            "p_value": self.p_value,
            "threshold": self.p_threshold,
            "significant": self.significant,
            "r_min": self.r_min,
            "k_min": self.k_min,
            "alpha": self.alpha,
            "normal_p_value": self.normal_p_value,
        }


def binomial_report(
    n: int, k: int, p_threshold: float = STROKECAST_P_THRESHOLD
) -> BinomialReport:
    """Build a :class:`BinomialReport` for ``k`` of ``n``."""
    p_value = binomial_sf(n, k)
    k_min, r_min = min_significant_rate(n, p_threshold)
    return BinomialReport(
        n=n,
        k=k,
        rate=k / n,
        p_value=p_value,
        p_threshold=p_threshold,
        significant=p_value < p_threshold,
        k_min=k_min,
        r_min=r_min,
        normal_p_value=normal_approx_sf(n, k),
    )


def evaluate_rates(
    results: Iterable[ClassificationResult], p_threshold: float = STROKECAST_P_THRESHOLD
) -> BinomialReport:
    """Count correct decisions and test them against chance.

    Ties never count as successes.

    Raises:
        InsufficientDataError: If ``results`` is empty.
        DataError: If a result carries no true gender.
    """
    items = list(results)
    if not items:
        raise InsufficientDataError("cannot evaluate an empty result list")
    unlabeled = [r.writer_id for r in items if r.true_gender is None]
    if unlabeled:
        raise DataError(f"results without a true gender: {unlabeled[:5]}")
    k = sum(1 for r in items if r.correct)
    return binomial_report(len(items), k, p_threshold)
