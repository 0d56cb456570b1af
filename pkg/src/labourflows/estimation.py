"""
From panel observations to transition counts, to the maximum-likelihood
stochastic matrix, to a regularised generator.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Hashable

import numpy as np

from .core import GeneratorMatrix, PanelDataset, StochasticMatrix, TransitionCounts
from .exceptions import (
    EmptyCountsWarning,
    EmptyRowError,
    InsufficientDataError,
    InvalidGeneratorError,
    LabourFlowError,
    PeriodOrderError,
)
from .kernels import SeriesConfig, matrix_log_series

__all__ = [
    "RegularizationMethod",
    "GeneratorEstimate",
    "count_transitions",
    "mle_stochastic",
    "regularize",
    "estimate_generator",
    "estimate_from_counts",
    "estimate_series",
]

_NEG_TOL = 1e-12


class RegularizationMethod(enum.Enum):
    """How negative off-diagonal entries of the log-series output are removed.

    TRUNCATE_ABSORB
        Zero the negatives and let the diagonal absorb them.
    REDISTRIBUTE_PROPORTIONAL
        Zero the negatives and take the removed mass out of the row's
        positive off-diagonals in proportion to their size.
    NONE
        Refuse matrices with negative off-diagonals.
    """

    TRUNCATE_ABSORB = "truncate"
    REDISTRIBUTE_PROPORTIONAL = "redistribute"
    NONE = "none"

    @classmethod
    def parse(cls, value) -> "RegularizationMethod":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {
            "truncate": cls.TRUNCATE_ABSORB,
            "truncate_absorb": cls.TRUNCATE_ABSORB,
            "truncateabsorb": cls.TRUNCATE_ABSORB,
            "redistribute": cls.REDISTRIBUTE_PROPORTIONAL,
            "redistribute_proportional": cls.REDISTRIBUTE_PROPORTIONAL,
            "redistributeproportional": cls.REDISTRIBUTE_PROPORTIONAL,
            "none": cls.NONE,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown regularization method {value!r}") from None


@dataclass(frozen=True, eq=False)
class GeneratorEstimate:
    """Result of estimating one generator.

    ``Q`` and ``P`` are None when the estimate is invalid (``error`` then
    says why); this lets a series of estimates keep going past a bad period
    pair.
    """

    Q: GeneratorMatrix | None
    P: StochasticMatrix | None
    counts: TransitionCounts | None
    raw_Qtilde: np.ndarray | None
    regularization: RegularizationMethod
    series_converged: bool
    negative_mass_removed: float
    terms_used: int = 0
    from_period: Hashable | None = None
    to_period: Hashable | None = None
    error: str | None = None

    @property
    def is_valid(self) -> bool:
        """Usable downstream: estimated without error and the log series converged."""
        return self.error is None and self.Q is not None and self.series_converged


def count_transitions(panel: PanelDataset, from_period, to_period) -> TransitionCounts:
    """Count individuals in state i at `from_period` and state j at `to_period`.

    Individuals missing in either period are left out. An empty
    intersection gives all-zero counts and an :class:`EmptyCountsWarning`.
    """
    t0 = panel.period_index(from_period)
    t1 = panel.period_index(to_period)
    if t1 != t0 + 1:
        raise PeriodOrderError(f"periods {from_period!r} and {to_period!r} are not consecutive")
    a = panel.states[:, t0].astype(np.int64)
    b = panel.states[:, t1].astype(np.int64)
    both = (a >= 0) & (b >= 0)
    K = panel.space.K
    counts = np.bincount(a[both] * K + b[both], minlength=K * K).reshape(K, K)
    result = TransitionCounts(counts, panel.space, from_period, to_period)
    if result.is_empty:
        warnings.warn(
            f"no individual observed in both {from_period!r} and {to_period!r}",
            EmptyCountsWarning,
            stacklevel=2,
        )
    return result


def mle_stochastic(counts: TransitionCounts) -> StochasticMatrix:
    """``p_ij = m_ij / m_i``; raises EmptyRowError for a state with no exits observed."""
    C = np.asarray(counts.counts, dtype=float)
    m = C.sum(axis=1)
    empty = np.flatnonzero(m == 0)
    if empty.size:
        raise EmptyRowError(counts.space.label(int(empty[0])))
    return StochasticMatrix(C / m[:, None], counts.space)


def regularize(Qtilde, method: RegularizationMethod) -> tuple[np.ndarray, float]:
    """Project a zero-row-sum matrix onto valid generators.

    Returns the adjusted matrix and the total magnitude of negative
    off-diagonal entries that were zeroed.
    """
    method = RegularizationMethod.parse(method)
    Qt = np.asarray(Qtilde, dtype=float)
    K = Qt.shape[0]
    offmask = ~np.eye(K, dtype=bool)
    neg = np.where(offmask & (Qt < 0), Qt, 0.0)
    removed = max(0.0, float(-neg.sum()))

    if method is RegularizationMethod.NONE:
        if neg.min(initial=0.0) < -_NEG_TOL:
            raise InvalidGeneratorError(
                f"raw generator has negative off-diagonal entries (min {neg.min():.3g}) "
                "and no regularization was requested"
            )
        Q = np.where(offmask, np.maximum(Qt, 0.0), Qt)
        np.fill_diagonal(Q, -(Q * offmask).sum(axis=1))
        return Q, removed

    Q = Qt.copy()
    for i in range(K):
        row_neg = -neg[i].sum()
        if row_neg == 0.0:
            continue
        off = offmask[i]
        if method is RegularizationMethod.TRUNCATE_ABSORB:
            Q[i, i] = Qt[i, i] - row_neg
            Q[i, off] = np.maximum(Qt[i, off], 0.0)
        else:
            pos = np.where(off & (Qt[i] > 0), Qt[i], 0.0)
            total_pos = pos.sum()
            new_off = pos.copy()
            if total_pos > 0:
                new_off -= row_neg * pos / total_pos
            new_off = np.maximum(new_off, 0.0)
            Q[i] = new_off
            Q[i, i] = -new_off[off].sum()
    return Q, removed


def estimate_generator(
    P: StochasticMatrix,
    method: RegularizationMethod = RegularizationMethod.TRUNCATE_ABSORB,
    cfg: SeriesConfig | None = None,
    counts: TransitionCounts | None = None,
) -> GeneratorEstimate:
    """Log series of P followed by regularisation.

    A series that does not converge is flagged on the result, not raised.
    With ``method=NONE`` a negative off-diagonal raises InvalidGeneratorError.
    """
    method = RegularizationMethod.parse(method)
    if not isinstance(P, StochasticMatrix):
        P = StochasticMatrix(P)
    res = matrix_log_series(P, cfg)
    Q, removed = regularize(res.Qtilde, method)
    if removed == 0.0:
        Q = res.Qtilde.copy()
    G = GeneratorMatrix(Q, P.space)
    return GeneratorEstimate(
        Q=G,
        P=P,
        counts=counts,
        raw_Qtilde=res.Qtilde,
        regularization=method,
        series_converged=res.converged,
        negative_mass_removed=removed,
        terms_used=res.terms_used,
        from_period=counts.period if counts is not None else None,
        to_period=counts.to_period if counts is not None else None,
    )


def estimate_from_counts(
    counts: TransitionCounts,
    method: RegularizationMethod = RegularizationMethod.TRUNCATE_ABSORB,
    cfg: SeriesConfig | None = None,
) -> GeneratorEstimate:
    """Counts to P to Q. Failures come back as an invalid estimate instead of raising."""
    method = RegularizationMethod.parse(method)
    try:
        P = mle_stochastic(counts)
        return estimate_generator(P, method, cfg, counts=counts)
    except LabourFlowError as exc:
        return GeneratorEstimate(
            Q=None,
            P=None,
            counts=counts,
            raw_Qtilde=None,
            regularization=method,
            series_converged=False,
            negative_mass_removed=0.0,
            from_period=counts.period,
            to_period=counts.to_period,
            error=str(exc),
        )


def estimate_series(
    panel: PanelDataset,
    method: RegularizationMethod = RegularizationMethod.TRUNCATE_ABSORB,
    cfg: SeriesConfig | None = None,
) -> list[GeneratorEstimate]:
    """One generator estimate per pair of consecutive periods, in period order."""
    if len(panel.periods) < 2:
        raise InsufficientDataError("need at least two periods to estimate transitions")
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyCountsWarning)
        for p0, p1 in zip(panel.periods[:-1], panel.periods[1:]):
            out.append(estimate_from_counts(count_transitions(panel, p0, p1), method, cfg))
    return out
