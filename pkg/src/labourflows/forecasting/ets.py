"""Additive Holt-Winters (level, trend, additive season) with grid-searched smoothing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import FitError
from ._common import FittedModel, as_series, residual_variance, seasonal_design

GRID = np.round(np.arange(0.05, 0.951, 0.05), 2)


@dataclass(eq=False)
class ETSModel(FittedModel):
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    level: float = 0.0
    slope: float = 0.0
    seasonal: np.ndarray = field(default=None, repr=False)
    n_obs: int = 0
    season_length: int = 4

    def forecast(self, h: int):
        m = self.season_length
        steps = np.arange(1, h + 1)
        idx = (self.n_obs - 1 + steps) % m
        point = self.level + steps * self.slope + self.seasonal[idx]
        # c_j = alpha + beta j + gamma [j a multiple of m]
        j = np.arange(1, h)
        c = self.alpha + self.beta * j + self.gamma * (j % m == 0)
        growth = 1.0 + np.concatenate([[0.0], np.cumsum(c**2)])
        return point, growth


def _initial_states(y: np.ndarray, m: int):
    """Level, slope and seasonal states from a trend+season regression on the first two seasons."""
    n0 = min(y.size, 2 * m)
    X = seasonal_design(np.arange(n0), m)
    coef, *_ = np.linalg.lstsq(X, y[:n0], rcond=None)
    d = np.concatenate([[0.0], coef[2:]])
    season = d - d.mean()
    intercept = coef[0] + d.mean()
    # states dated just before t = 0
    return intercept - coef[1], coef[1], season


def _run(y, m, alpha, beta, gamma, l0, b0, s0):
    """Vectorised error-correction recursions over arrays of parameters."""
    G = alpha.size
    lev = np.full(G, l0)
    slope = np.full(G, b0)
    S = np.tile(s0, (G, 1))
    E = np.empty((G, y.size))
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(y.size):
            j = t % m
            e = y[t] - (lev + slope + S[:, j])
            E[:, t] = e
            lev = lev + slope + alpha * e
            slope = slope + beta * e
            S[:, j] = S[:, j] + gamma * e
    return E, lev, slope, S


def fit_ets(series) -> ETSModel:
    """Fit additive Holt-Winters, choosing smoothing weights on a 0.05..0.95 grid.

    Weights are searched in the classical component form (alpha, beta*,
    gamma*) and stored in error-correction form, ``beta = alpha beta*`` and
    ``gamma = (1 - alpha) gamma*``. The selected triple minimises the
    in-sample one-step squared error.
    """
    s = as_series(series)
    y, m = s.values, s.season_length
    if y.size < 2 * m or y.size < 4:
        raise FitError(f"ETS needs at least {max(2 * m, 4)} observations, got {y.size}")
    l0, b0, s0 = _initial_states(y, m)
    a, bs, gs = (g.ravel() for g in np.meshgrid(GRID, GRID, GRID, indexing="ij"))
    alpha, beta, gamma = a, a * bs, (1.0 - a) * gs
    E, lev, slope, S = _run(y, m, alpha, beta, gamma, l0, b0, s0)
    sse = np.einsum("ij,ij->i", E, E)
    sse[~np.isfinite(sse)] = np.inf
    best = int(np.argmin(sse))
    if not np.isfinite(sse[best]):
        raise FitError("every smoothing combination diverged")
    k = 3 + m
    resid = E[best]
    return ETSModel(
        family="ets",
        order=f"AAA(alpha={a[best]:.2f}, beta*={bs[best]:.2f}, gamma*={gs[best]:.2f})",
        residuals=resid,
        n_params=k,
        sigma2=residual_variance(resid, k) if resid.size > k else float(resid @ resid) / resid.size,
        alpha=float(alpha[best]),
        beta=float(beta[best]),
        gamma=float(gamma[best]),
        level=float(lev[best]),
        slope=float(slope[best]),
        seasonal=S[best].copy(),
        n_obs=y.size,
        season_length=m,
    )
