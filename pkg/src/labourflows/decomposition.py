"""
Counterfactual decomposition of share volatility.

For a flow (s, r), every other off-diagonal rate is frozen at a reference
value (initial value, sample mean or HP trend) while q_sr keeps its
observed path. The resulting counterfactual shares are detrended together
with the fitted shares and the flow's contribution is the ratio
``Cov(fitted cycle, counterfactual cycle) / Var(fitted cycle)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .core import GeneratorMatrix, ShareVector
from .dynamics import equilibrium, propagate
from .exceptions import DegenerateError, DimensionError, InsufficientDataError, SingularMatrixError

__all__ = [
    "ReferenceKind",
    "ReferenceRule",
    "CounterfactualMode",
    "ContributionTable",
    "hp_filter",
    "reference_series",
    "counterfactual_generators",
    "counterfactual_shares",
    "fitted_shares",
    "contribution",
    "decompose_volatility",
]

# cycles smaller than this are filter round-off, not variation
_FLAT_CYCLE = 1e-12


class ReferenceKind(enum.Enum):
    INITIAL_VALUE = "initial"
    SAMPLE_MEAN = "mean"
    HP_TREND = "hp"


class CounterfactualMode(enum.Enum):
    EQUILIBRIUM = "equilibrium"
    ONE_STEP = "onestep"

    @classmethod
    def parse(cls, value) -> "CounterfactualMode":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        for m in cls:
            if m.value == key:
                return m
        raise ValueError(f"unknown counterfactual mode {value!r}")


@dataclass(frozen=True)
class ReferenceRule:
    kind: ReferenceKind = ReferenceKind.HP_TREND
    hp_lambda: float = 1600.0

    def __post_init__(self):
        if isinstance(self.kind, str):
            key = self.kind.strip().lower()
            aliases = {"initial": "initial", "initialvalue": "initial", "mean": "mean",
                       "samplemean": "mean", "hp": "hp", "hptrend": "hp", "trend": "hp"}
            object.__setattr__(self, "kind", ReferenceKind(aliases[key.replace("_", "")]))
        if self.kind is ReferenceKind.HP_TREND and not self.hp_lambda > 0:
            raise ValueError("hp_lambda must be positive")


@dataclass(frozen=True, eq=False)
class ContributionTable:
    """Contribution (beta) of each flow (s, r) to the target share's cycle."""

    entries: dict
    target_state: str
    counterfactual_mode: CounterfactualMode
    fitted_cycle: np.ndarray = field(repr=False, default=None)
    counterfactual_cycles: dict = field(repr=False, default_factory=dict)

    @property
    def total(self) -> float:
        return float(sum(self.entries.values()))

    def rows(self):
        """``(from_label, to_label, beta)`` in table order."""
        return [(s, r, b) for (s, r), b in self.entries.items()]


def hp_filter(series, lam: float = 1600.0) -> tuple[np.ndarray, np.ndarray]:
    """Hodrick-Prescott trend and cycle.

    Solves the pentadiagonal system ``(I + lam D'D) trend = y`` (D the
    second-difference operator) by banded Cholesky elimination.

    Returns
    -------
    trend, cycle : ndarray
    """
    y = np.asarray(series, dtype=float).ravel()
    n = y.size
    if n < 4:
        raise InsufficientDataError("hp_filter needs at least 4 observations")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    # D'D band: main diagonal, first and second super-diagonals
    d0 = np.full(n, 6.0)
    d0[[0, -1]] = 1.0
    d0[[1, -2]] = 5.0
    d1 = np.full(n - 1, -4.0)
    d1[[0, -1]] = -2.0
    d2 = np.ones(n - 2)
    ab = np.zeros((3, n))
    ab[0, 2:] = lam * d2
    ab[1, 1:] = lam * d1
    ab[2, :] = 1.0 + lam * d0
    trend = scipy.linalg.solveh_banded(ab, y, lower=False)
    return trend, y - trend


def _series_array(Q_series) -> tuple[np.ndarray, object]:
    Gs = [Q if isinstance(Q, GeneratorMatrix) else GeneratorMatrix(Q) for Q in Q_series]
    if not Gs:
        raise ValueError("empty generator series")
    space = Gs[0].space
    for G in Gs:
        if G.space != space:
            raise DimensionError("generators in the series use different state spaces")
    return np.stack([G.entries for G in Gs]), space


def reference_series(Q_series, rule: ReferenceRule) -> np.ndarray:
    """Reference off-diagonal rates, shape (T, K, K); diagonals are zero."""
    A, _ = _series_array(Q_series)
    T, K, _ = A.shape
    off = A.copy()
    off[:, np.arange(K), np.arange(K)] = 0.0
    if rule.kind is ReferenceKind.INITIAL_VALUE:
        ref = np.broadcast_to(off[0], off.shape).copy()
    elif rule.kind is ReferenceKind.SAMPLE_MEAN:
        ref = np.broadcast_to(off.mean(axis=0), off.shape).copy()
    else:
        ref = np.zeros_like(off)
        for i in range(K):
            for j in range(K):
                if i != j:
                    ref[:, i, j] = hp_filter(off[:, i, j], rule.hp_lambda)[0]
        # a trend can dip below zero for rates near zero; rates cannot
        ref = np.maximum(ref, 0.0)
    return ref


def counterfactual_generators(Q_series, rule: ReferenceRule, vary) -> list[GeneratorMatrix]:
    """Generators with every off-diagonal at its reference value except (s, r)."""
    A, space = _series_array(Q_series)
    s, r = (space.resolve(v) for v in vary)
    if s == r:
        raise ValueError("the varying entry must be off-diagonal")
    ref = reference_series(Q_series, rule)
    ref[:, s, r] = A[:, s, r]
    return [GeneratorMatrix.from_offdiagonal(m, space) for m in ref]


def _shares_array(shares, K) -> np.ndarray:
    return np.stack([np.asarray(getattr(x, "shares", x), dtype=float) for x in shares]).reshape(-1, K)


def counterfactual_shares(QCF_series, mode, observed_shares=None) -> list[ShareVector | None]:
    """Counterfactual shares, one per generator in the series.

    EQUILIBRIUM maps each generator to its equilibrium shares (None where
    the equilibrium is not unique). ONE_STEP propagates the observed share
    at the start of each period through that period's generator, so
    `observed_shares[t]` must be the share at the origin of ``QCF_series[t]``.
    """
    mode = CounterfactualMode.parse(mode)
    Gs = [Q if isinstance(Q, GeneratorMatrix) else GeneratorMatrix(Q) for Q in QCF_series]
    out: list[ShareVector | None] = []
    if mode is CounterfactualMode.EQUILIBRIUM:
        for G in Gs:
            try:
                out.append(equilibrium(G).shares)
            except SingularMatrixError:
                out.append(None)
        return out
    if observed_shares is None or len(observed_shares) < len(Gs):
        raise ValueError("one-step counterfactuals need an observed share for every period")
    pis = _shares_array(observed_shares[: len(Gs)], Gs[0].K)
    return [propagate(ShareVector(p, G.space), G, 1.0) for p, G in zip(pis, Gs)]


def fitted_shares(Q_series, observed_shares) -> list[ShareVector]:
    """One-period-ahead fitted shares from the observed shares and estimated generators."""
    return counterfactual_shares(Q_series, CounterfactualMode.ONE_STEP, observed_shares)


def contribution(pi_cycle, piCF_cycle) -> float:
    """``Cov(pi_cycle, piCF_cycle) / Var(pi_cycle)``, both with divisor n - 1."""
    x = np.asarray(pi_cycle, dtype=float).ravel()
    y = np.asarray(piCF_cycle, dtype=float).ravel()
    if x.size != y.size:
        raise DimensionError("cycles must have equal length")
    if x.size < 3:
        raise InsufficientDataError("contribution needs at least 3 observations")
    xc = x - x.mean()
    var = xc @ xc / (x.size - 1)
    if not var > 0:
        raise DegenerateError("target cycle has zero variance")
    return float(xc @ (y - y.mean()) / (x.size - 1) / var)


def _flow_pairs(K, target, all_pairs):
    if all_pairs:
        return [(i, j) for i in range(K) for j in range(K) if i != j]
    return [(target, j) for j in range(K) if j != target] + [(i, target) for i in range(K) if i != target]


def decompose_volatility(
    Q_series: Sequence,
    observed_shares: Sequence,
    target_state,
    rule: ReferenceRule | None = None,
    mode=CounterfactualMode.ONE_STEP,
    hp_lambda: float = 1600.0,
    all_pairs: bool = False,
    use_observed: bool = False,
) -> ContributionTable:
    """Contribution of each flow into or out of `target_state` to its share's volatility.

    Parameters
    ----------
    Q_series : sequence of GeneratorMatrix
        Per-period generators; ``Q_series[t]`` moves shares from period t to t+1.
    observed_shares : sequence of ShareVector or array_like
        Observed shares at the origin of each period (length ``len(Q_series)``
        or one more).
    target_state : str or int
    rule : ReferenceRule, optional
        Reference values for the frozen rates; defaults to the HP trend
        with lambda 1600.
    mode : CounterfactualMode
        ONE_STEP (default) or EQUILIBRIUM.
    hp_lambda : float
        Smoothing parameter used to detrend the shares.
    all_pairs : bool
        Decompose over all K(K-1) flows instead of the 2(K-1) flows that
        touch the target.
    use_observed : bool
        Detrend the observed target share (at the destination period)
        instead of the fitted one.

    Notes
    -----
    The fitted share follows the counterfactual mode: one-step predictions
    from the observed shares in ONE_STEP mode, the equilibrium of each
    estimated generator in EQUILIBRIUM mode.
    """
    rule = rule or ReferenceRule(ReferenceKind.HP_TREND, hp_lambda)
    mode = CounterfactualMode.parse(mode)
    A, space = _series_array(Q_series)
    T, K, _ = A.shape
    k = space.resolve(target_state)
    if T < 8:
        raise InsufficientDataError("decomposition needs at least 8 periods")

    if use_observed:
        obs = _shares_array(observed_shares, K)
        if obs.shape[0] < T + 1:
            raise ValueError("use_observed needs shares at the destination of every period")
        target = obs[1 : T + 1, k]
    else:
        fitted = counterfactual_shares(list(Q_series), mode, observed_shares)
        if any(f is None for f in fitted):
            raise DegenerateError("fitted equilibrium shares undefined for some period")
        target = np.array([f.shares[k] for f in fitted])
    _, fitted_cycle = hp_filter(target, hp_lambda)
    if not np.std(fitted_cycle) > _FLAT_CYCLE:
        raise DegenerateError("target share has no cyclical variation")

    entries = {}
    cycles = {}
    for s, r in _flow_pairs(K, k, all_pairs):
        QCF = counterfactual_generators(Q_series, rule, (s, r))
        cf = counterfactual_shares(QCF, mode, observed_shares)
        key = (space.label(s), space.label(r))
        if any(c is None for c in cf):
            entries[key] = float("nan")
            continue
        _, cf_cycle = hp_filter([c.shares[k] for c in cf], hp_lambda)
        entries[key] = contribution(fitted_cycle, cf_cycle)
        cycles[key] = cf_cycle
    return ContributionTable(entries, space.label(k), mode, fitted_cycle, cycles)
