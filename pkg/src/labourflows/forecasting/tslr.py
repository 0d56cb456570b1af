"""Time-series linear regression on a linear trend and seasonal dummies."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import FitError
from ._common import FittedModel, as_series, residual_variance, seasonal_design


@dataclass(eq=False)
class TSLRModel(FittedModel):
    coef: np.ndarray = field(default=None)
    xtx_inv: np.ndarray = field(default=None, repr=False)
    n_obs: int = 0
    season_length: int = 4

    @property
    def intercept(self) -> float:
        return float(self.coef[0])

    @property
    def trend(self) -> float:
        return float(self.coef[1])

    @property
    def seasonal(self) -> np.ndarray:
        """Seasonal effects relative to season 0 (which is 0 by construction)."""
        return np.concatenate([[0.0], self.coef[2:]])

    def forecast(self, h: int):
        X0 = seasonal_design(np.arange(self.n_obs, self.n_obs + h), self.season_length)
        point = X0 @ self.coef
        # leverage of each new design row: prediction variance / sigma2
        growth = 1.0 + np.einsum("ij,jk,ik->i", X0, self.xtx_inv, X0)
        return point, growth


def fit_tslr(series) -> TSLRModel:
    """Ordinary least squares on intercept, trend and seasonal indicators."""
    s = as_series(series)
    y, m = s.values, s.season_length
    n = y.size
    if n < m + 2:
        raise FitError(f"TSLR needs at least {m + 2} observations, got {n}")
    X = seasonal_design(np.arange(n), m)
    k = X.shape[1]
    if np.linalg.matrix_rank(X) < k:
        raise FitError("TSLR design matrix is rank deficient")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    return TSLRModel(
        family="tslr",
        order=f"trend+season({m})",
        residuals=resid,
        n_params=k,
        sigma2=residual_variance(resid, k),
        coef=coef,
        xtx_inv=np.linalg.inv(X.T @ X),
        n_obs=n,
        season_length=m,
    )
