"""
Share dynamics under a generator: propagation, equilibrium shares and the
speed of convergence, seasonal aggregation, and the three-state
(employed, unemployed, inactive) closed forms.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import GeneratorMatrix, ShareVector, StateSpace
from .exceptions import DegenerateError, DimensionError, NonUniqueEquilibriumError, SingularMatrixError
from .kernels import eigenvalues, matrix_exp, solve_linear

__all__ = [
    "ThreeStateRates",
    "EquilibriumResult",
    "THREE_STATE_SPACE",
    "propagate",
    "equilibrium",
    "three_state_generator",
    "equilibrium_three_state",
    "unemployment_rate",
    "aggregate_seasonal",
    "commutator_norm",
]

THREE_STATE_SPACE = StateSpace(("e", "u", "n"))


# beyond this condition number of 1'1 - Q the shares lose more than ~6 digits
MAX_CONDITION = 1e10


def _generator(Q) -> GeneratorMatrix:
    return Q if isinstance(Q, GeneratorMatrix) else GeneratorMatrix(Q)


@dataclass(frozen=True)
class ThreeStateRates:
    """Flow rates of the employed / unemployed / inactive model.

    alpha: u -> e, lam: e -> u, mu: e -> n, gamma: u -> n,
    phi_u: n -> u, phi_e: n -> e.
    """

    alpha: float
    lam: float
    mu: float
    gamma: float
    phi_u: float
    phi_e: float

    def __post_init__(self):
        for name in ("alpha", "lam", "mu", "gamma", "phi_u", "phi_e"):
            if getattr(self, name) < 0:
                raise ValueError(f"rate {name} must be nonnegative")


@dataclass(frozen=True, eq=False)
class EquilibriumResult:
    shares: ShareVector
    spectral_gap: float
    half_life: float
    eigenvalues: np.ndarray


def propagate(pi0, Q, t: float = 1.0) -> ShareVector:
    """Shares after time `t`: ``pi0 @ expm(Q t)``."""
    if t < 0:
        raise ValueError("propagate: t must be nonnegative")
    G = _generator(Q)
    if not isinstance(pi0, ShareVector):
        pi0 = ShareVector(pi0, G.space)
    if pi0.space.K != G.K:
        raise DimensionError("share vector and generator have different state spaces")
    if t == 0:
        return ShareVector(pi0.shares, G.space, tol=1e-9)
    out = pi0.shares @ matrix_exp(G.entries * t)
    return ShareVector(out, G.space, tol=1e-9)


def equilibrium(Q) -> EquilibriumResult:
    """Stationary shares from ``x (1'1 - Q) = 1`` plus convergence speed.

    The spectral gap is minus the largest real part among the eigenvalues
    of Q other than the zero eigenvalue; the half-life is ``ln 2 / gap``
    periods.
    """
    G = _generator(Q)
    K = G.K
    A = np.ones((K, K)) - G.entries
    try:
        x = solve_linear(A, np.ones(K))
    except SingularMatrixError as exc:
        raise NonUniqueEquilibriumError(
            "equilibrium is not unique (the chain has more than one recurrent class)"
        ) from exc
    cond = np.linalg.cond(A, 1)
    if not cond < MAX_CONDITION:
        raise NonUniqueEquilibriumError(
            f"equilibrium is numerically not unique: the chain is nearly reducible "
            f"(condition number {cond:.2g})"
        )
    scale = max(1.0, np.abs(G.entries).max())
    if np.abs(x @ G.entries).max() > 1e-9 * scale or abs(x.sum() - 1.0) > 1e-10:
        raise NonUniqueEquilibriumError("equilibrium solve failed its stationarity check")
    # round-off below the solver's error bound can leave tiny negative shares
    bound = max(1e-14, 10 * cond * np.finfo(float).eps)
    if x.min() < -bound:
        raise NonUniqueEquilibriumError("equilibrium solve produced a negative share")
    x = np.where(x < bound, np.maximum(x, 0.0), x)
    x = x / x.sum()
    lam = eigenvalues(G.entries)
    rest = np.delete(lam, np.argmin(np.abs(lam)))
    gap = float(-rest.real.max()) if rest.size else np.inf
    half = float(np.log(2.0) / gap) if gap > 0 else np.inf
    return EquilibriumResult(ShareVector(x, G.space, tol=1e-10), gap, half, lam)


def three_state_generator(rates: ThreeStateRates) -> GeneratorMatrix:
    """Generator over (e, u, n) built from the six flow rates."""
    r = rates
    off = np.array(
        [
            [0.0, r.lam, r.mu],
            [r.alpha, 0.0, r.gamma],
            [r.phi_e, r.phi_u, 0.0],
        ]
    )
    return GeneratorMatrix.from_offdiagonal(off, THREE_STATE_SPACE)


def equilibrium_three_state(rates: ThreeStateRates) -> ShareVector:
    """Closed-form steady state of the three-state model.

    Each share is proportional to the sum over spanning trees directed into
    that state of the product of their rates::

        e: phi_e (alpha + gamma) + alpha phi_u
        u: phi_u (lam + mu) + phi_e lam
        n: alpha mu + gamma (lam + mu)

    normalised by their sum.
    """
    r = rates
    ne = r.phi_e * (r.alpha + r.gamma) + r.alpha * r.phi_u
    nu = r.phi_u * (r.lam + r.mu) + r.phi_e * r.lam
    nn = r.alpha * r.mu + r.gamma * (r.lam + r.mu)
    # equals (gamma + phi_u)(lam + mu) + alpha (phi_u + mu) + phi_e (lam + gamma + alpha)
    denom = ne + nu + nn
    if denom <= 0:
        raise DegenerateError("three-state rates are degenerate: equilibrium denominator is zero")
    return ShareVector(np.array([ne, nu, nn]) / denom, THREE_STATE_SPACE)


def unemployment_rate(shares: ShareVector, employed_states: Iterable, unemployed_state) -> float:
    """Unemployed share over the labour force (unemployed plus employed)."""
    sp = shares.space
    u = float(shares.shares[sp.resolve(unemployed_state)])
    e = float(sum(shares.shares[sp.resolve(s)] for s in employed_states))
    if u + e <= 0:
        raise ZeroDivisionError("labour force is empty")
    return u / (u + e)


def aggregate_seasonal(Qs: Sequence) -> GeneratorMatrix:
    """Annual generator: the elementwise sum of the seasonal generators.

    Exact for the product of the seasonal exponentials only when the
    generators commute; see :func:`commutator_norm`.
    """
    Gs = [_generator(Q) for Q in Qs]
    if not Gs:
        raise ValueError("aggregate_seasonal needs at least one generator")
    space = Gs[0].space
    for G in Gs[1:]:
        if G.space != space:
            raise DimensionError("seasonal generators have different state spaces")
    return GeneratorMatrix(np.sum([G.entries for G in Gs], axis=0), space)


def commutator_norm(Qs: Sequence) -> float:
    """``max_{s<r} ||Q_s Q_r - Q_r Q_s||_inf`` (0 for a commuting family)."""
    mats = [np.asarray(_generator(Q).entries) for Q in Qs]
    worst = 0.0
    for A, B in itertools.combinations(mats, 2):
        C = A @ B - B @ A
        worst = max(worst, float(np.abs(C).sum(axis=1).max()))
    return worst
