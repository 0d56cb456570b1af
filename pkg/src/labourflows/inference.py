"""
Bootstrap standard errors for generators and equilibrium shares, and
bootstrap tests of zero difference between two estimates.

Resampling N transition records with replacement only changes the data
through the transition counts, and those counts are multinomial with cell
probabilities ``m_ij / N``. Draws are therefore generated directly as
multinomial counts; the distribution is identical to index resampling and
the result is exactly invariant to the order of the records.

Every draw gets its own PCG64 stream spawned from the seed, so results do
not depend on evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import GeneratorMatrix, PanelDataset, StateSpace, TransitionCounts
from .dynamics import equilibrium
from .estimation import RegularizationMethod, regularize
from .exceptions import ConvergenceError, EmptyRowError, LabourFlowError, SingularMatrixError
from .kernels import SeriesConfig, matrix_log_series

__all__ = [
    "BootstrapResult",
    "EquilibriumBootstrap",
    "PairwiseTest",
    "transition_counts_from_records",
    "bootstrap_generator",
    "bootstrap_seasonal",
    "bootstrap_individuals",
    "bootstrap_equilibrium",
    "pairwise_difference_test",
    "pairwise_generator_tests",
    "pairwise_equilibrium_tests",
]

MAX_ATTEMPT_FACTOR = 10


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    """Bootstrap distribution of a generator estimate.

    `se` is computed from the raw log-series draws with divisor B. `draws`
    holds the regularised generator of every draw (these coincide with the
    raw draws whenever no off-diagonal came out negative).
    """

    B: int
    point: GeneratorMatrix
    se: np.ndarray
    draws: list[GeneratorMatrix] = field(repr=False)
    raw_draws: np.ndarray = field(repr=False)
    seed: int
    attempts: int

    @property
    def space(self) -> StateSpace:
        return self.point.space


@dataclass(frozen=True, eq=False)
class EquilibriumBootstrap:
    point: np.ndarray
    se: np.ndarray
    draws: np.ndarray = field(repr=False)
    n_skipped: int


@dataclass(frozen=True)
class PairwiseTest:
    statistic: float
    p_value: float
    B: int


def transition_counts_from_records(records, space: StateSpace) -> TransitionCounts:
    """Counts from ``(origin, destination)`` pairs given as labels or indices."""
    arr = list(records)
    K = space.K
    C = np.zeros((K, K), dtype=np.int64)
    for a, b in arr:
        C[space.resolve(a), space.resolve(b)] += 1
    return TransitionCounts(C, space)


def _as_counts(transitions, space) -> TransitionCounts:
    if isinstance(transitions, TransitionCounts):
        return transitions
    arr = np.asarray(transitions)
    if arr.ndim == 2 and arr.shape[1] == 2 and arr.dtype.kind in "iu":
        if space is None:
            space = StateSpace.default(int(arr.max()) + 1)
        K = space.K
        C = np.bincount(arr[:, 0] * K + arr[:, 1], minlength=K * K).reshape(K, K)
        return TransitionCounts(C, space)
    if space is None:
        raise ValueError("a state space is needed for labelled transition records")
    return transition_counts_from_records(transitions, space)


def _raw_generator(C: np.ndarray, cfg) -> np.ndarray:
    m = C.sum(axis=1)
    if np.any(m == 0):
        raise EmptyRowError(int(np.flatnonzero(m == 0)[0]))
    return matrix_log_series(C / m[:, None], cfg).Qtilde


class _Drawer:
    """Shared redraw bookkeeping for the bootstrap loops."""

    def __init__(self, B, seed):
        self.B = B
        self.streams = np.random.SeedSequence(seed).spawn(B)
        self.attempts = 0

    def run(self, draw_fn):
        """Call ``draw_fn(rng)`` once per draw, redrawing on EmptyRowError."""
        out = []
        cap = MAX_ATTEMPT_FACTOR * self.B
        for ss in self.streams:
            rng = np.random.Generator(np.random.PCG64(ss))
            while True:
                self.attempts += 1
                if self.attempts > cap:
                    raise ConvergenceError(
                        f"bootstrap gave up after {cap} attempts: too many draws with an empty state"
                    )
                try:
                    out.append(draw_fn(rng))
                    break
                except EmptyRowError:
                    continue
        return out


def _finish(B, seed, point_raw, raw, method, space, attempts) -> BootstrapResult:
    raw = np.asarray(raw)
    se = np.sqrt(((raw - raw.mean(axis=0)) ** 2).sum(axis=0) / B)
    draws = [GeneratorMatrix(regularize(q, method)[0], space) for q in raw]
    point = GeneratorMatrix(regularize(point_raw, method)[0], space)
    return BootstrapResult(B, point, se, draws, raw, seed, attempts)


def bootstrap_generator(
    transitions,
    B: int,
    seed: int,
    method: RegularizationMethod = RegularizationMethod.TRUNCATE_ABSORB,
    cfg: SeriesConfig | None = None,
    space: StateSpace | None = None,
) -> BootstrapResult:
    """Bootstrap the generator estimated from one sample of transitions.

    Parameters
    ----------
    transitions : TransitionCounts, (N, 2) integer array or iterable of pairs
        The N observed ``(origin, destination)`` transitions.
    B : int
        Number of bootstrap samples.
    seed : int
    method : RegularizationMethod
        Applied to the point estimate and to every stored draw.
    """
    if B < 1:
        raise ValueError("B must be at least 1")
    method = RegularizationMethod.parse(method)
    counts = _as_counts(transitions, space)
    space = counts.space
    C = counts.counts.astype(float)
    N = int(C.sum())
    if N < space.K:
        raise ValueError(f"need at least K={space.K} transitions, got {N}")
    point_raw = _raw_generator(C, cfg)
    flat = C.ravel()
    cells = np.flatnonzero(flat)
    probs = flat[cells] / N
    K = space.K

    def draw(rng):
        c = np.zeros(K * K)
        c[cells] = rng.multinomial(N, probs)
        return _raw_generator(c.reshape(K, K), cfg)

    drawer = _Drawer(B, seed)
    raw = drawer.run(draw)
    return _finish(B, seed, point_raw, raw, method, space, drawer.attempts)


def bootstrap_seasonal(
    counts_list: Sequence[TransitionCounts],
    B: int,
    seed: int,
    method: RegularizationMethod = RegularizationMethod.TRUNCATE_ABSORB,
    cfg: SeriesConfig | None = None,
) -> BootstrapResult:
    """Bootstrap an annual generator, the sum of one generator per season.

    The transitions of each season are resampled independently.
    """
    if B < 1:
        raise ValueError("B must be at least 1")
    method = RegularizationMethod.parse(method)
    space = counts_list[0].space
    Cs = [np.asarray(c.counts, dtype=float) for c in counts_list]
    K = space.K
    point_raw = sum(_raw_generator(C, cfg) for C in Cs)
    setup = []
    for C in Cs:
        flat = C.ravel()
        cells = np.flatnonzero(flat)
        setup.append((int(flat.sum()), cells, flat[cells] / flat.sum()))

    def draw(rng):
        total = np.zeros((K, K))
        for N, cells, probs in setup:
            c = np.zeros(K * K)
            c[cells] = rng.multinomial(N, probs)
            total += _raw_generator(c.reshape(K, K), cfg)
        return total

    drawer = _Drawer(B, seed)
    raw = drawer.run(draw)
    return _finish(B, seed, point_raw, raw, method, space, drawer.attempts)


def bootstrap_individuals(
    panel: PanelDataset,
    periods: Sequence,
    B: int,
    seed: int,
    method: RegularizationMethod = RegularizationMethod.TRUNCATE_ABSORB,
    cfg: SeriesConfig | None = None,
) -> BootstrapResult:
    """Bootstrap by resampling whole individuals over a window of periods.

    The statistic is the sum of the generators of the consecutive period
    pairs in `periods` (a single pair gives the ordinary generator). Keeping
    each individual's transitions together makes the standard errors robust
    to serial correlation within individuals.
    """
    if B < 1:
        raise ValueError("B must be at least 1")
    method = RegularizationMethod.parse(method)
    space = panel.space
    K = space.K
    idx = [panel.period_index(p) for p in periods]
    if len(idx) < 2 or any(b != a + 1 for a, b in zip(idx[:-1], idx[1:])):
        raise ValueError("periods must be at least two consecutive panel periods")
    S = panel.states[:, idx].astype(np.int64)
    n = S.shape[0]
    # per-individual cell code for each pair, -1 when either side is missing
    codes = np.where((S[:, :-1] >= 0) & (S[:, 1:] >= 0), S[:, :-1] * K + S[:, 1:], -1)

    def stat(weights):
        total = np.zeros((K, K))
        for j in range(codes.shape[1]):
            ok = codes[:, j] >= 0
            C = np.bincount(codes[ok, j], weights=weights[ok], minlength=K * K).reshape(K, K)
            total += _raw_generator(C, cfg)
        return total

    point_raw = stat(np.ones(n))

    def draw(rng):
        w = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(float)
        return stat(w)

    drawer = _Drawer(B, seed)
    raw = drawer.run(draw)
    return _finish(B, seed, point_raw, raw, method, space, drawer.attempts)


def bootstrap_equilibrium(result: BootstrapResult) -> EquilibriumBootstrap:
    """Standard errors (divisor B) of the equilibrium shares across the draws.

    Draws whose equilibrium is not unique are skipped and counted.
    """
    shares = []
    skipped = 0
    for Q in result.draws:
        try:
            shares.append(equilibrium(Q).shares.shares)
        except (SingularMatrixError, LabourFlowError):
            skipped += 1
    if not shares:
        raise ValueError("no bootstrap draw has a unique equilibrium")
    draws = np.array(shares)
    se = np.sqrt(((draws - draws.mean(axis=0)) ** 2).mean(axis=0))
    point = equilibrium(result.point).shares.shares
    return EquilibriumBootstrap(point, se, draws, skipped)


def pairwise_difference_test(draws_a, draws_b, observed_a: float, observed_b: float) -> PairwiseTest:
    """Two-sided bootstrap test of zero difference between two estimates.

    The bootstrap differences ``a_b - b_b`` are shifted to mean zero (the
    null) and the p-value is the fraction whose absolute value reaches the
    observed absolute difference.
    """
    a = np.asarray(draws_a, dtype=float).ravel()
    b = np.asarray(draws_b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("draws must be nonempty")
    if a.size != b.size:
        raise ValueError("draw lists must have equal length")
    d = a - b
    centred = d - d.mean()
    stat = float(observed_a - observed_b)
    # absorb round-off from the centring so exact ties count as ties
    slack = 1e-12 * max(1.0, np.abs(d).max(), abs(stat))
    p = float(np.mean(np.abs(centred) >= abs(stat) - slack))
    return PairwiseTest(stat, p, a.size)


def pairwise_generator_tests(res_a: BootstrapResult, res_b: BootstrapResult) -> np.ndarray:
    """K x K p-values comparing every entry of two bootstrapped generators."""
    K = res_a.space.K
    A = np.array([np.asarray(Q.entries) for Q in res_a.draws])
    Bd = np.array([np.asarray(Q.entries) for Q in res_b.draws])
    P = np.empty((K, K))
    for i in range(K):
        for j in range(K):
            P[i, j] = pairwise_difference_test(
                A[:, i, j], Bd[:, i, j], res_a.point.entries[i, j], res_b.point.entries[i, j]
            ).p_value
    return P


def pairwise_equilibrium_tests(eq_a: EquilibriumBootstrap, eq_b: EquilibriumBootstrap) -> np.ndarray:
    """Per-state p-values comparing two bootstrapped equilibria."""
    n = min(len(eq_a.draws), len(eq_b.draws))
    return np.array([
        pairwise_difference_test(eq_a.draws[:n, k], eq_b.draws[:n, k], eq_a.point[k], eq_b.point[k]).p_value
        for k in range(eq_a.point.size)
    ])
