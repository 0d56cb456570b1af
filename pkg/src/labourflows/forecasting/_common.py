from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..exceptions import FitError

# floor on the ML variance so a perfect fit gives a finite AICc
_MIN_SIGMA2 = 1e-300


@dataclass(frozen=True, eq=False)
class SeasonalSeries:
    """Equally spaced observations with a seasonal period (4 for quarterly data)."""

    values: np.ndarray
    season_length: int = 4
    period_ids: tuple | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("series values must be finite")
        if self.season_length < 1:
            raise ValueError("season_length must be positive")
        ids = tuple(self.period_ids) if self.period_ids is not None else tuple(range(v.size))
        if len(ids) != v.size:
            raise ValueError("need one period id per value")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "period_ids", ids)

    def __len__(self):
        return self.values.size

    def head(self, n: int) -> "SeasonalSeries":
        return SeasonalSeries(self.values[:n], self.season_length, self.period_ids[:n])


def as_series(series, season_length: int = 4) -> SeasonalSeries:
    if isinstance(series, SeasonalSeries):
        return series
    return SeasonalSeries(np.asarray(series, dtype=float), season_length)


def aicc(residuals, n_params: int) -> float:
    """Small-sample AIC from Gaussian one-step residuals.

    `n_params` counts the model's fitted parameters; one more is added for
    the innovation variance. Returns +inf when there are too few residuals.
    """
    e = np.asarray(residuals, dtype=float)
    n = e.size
    k = n_params + 1
    if n - k - 1 <= 0:
        return float("inf")
    sigma2 = max(float(e @ e) / n, _MIN_SIGMA2)
    loglik = -0.5 * n * (np.log(2 * np.pi * sigma2) + 1.0)
    return float(-2.0 * loglik + 2.0 * k + 2.0 * k * (k + 1) / (n - k - 1))


@dataclass(eq=False)
class FittedModel:
    """Common surface of the three model families.

    ``forecast(h)`` returns the point forecasts and the variance growth
    ``var_h / sigma2`` for horizons 1..h.
    """

    family: str
    order: str
    residuals: np.ndarray = field(repr=False)
    n_params: int
    sigma2: float

    @property
    def aicc(self) -> float:
        return aicc(self.residuals, self.n_params)

    def forecast(self, h: int) -> tuple[np.ndarray, np.ndarray]:  # pragma: no cover - abstract
        raise NotImplementedError


def residual_variance(e: np.ndarray, n_params: int) -> float:
    dof = e.size - n_params
    if dof <= 0:
        raise FitError("not enough observations to estimate the residual variance")
    return float(e @ e) / dof


def seasonal_design(t: Sequence[int], m: int) -> np.ndarray:
    """Intercept, linear trend and m - 1 seasonal indicators (season 0 is the base)."""
    t = np.asarray(t)
    cols = [np.ones(t.size), t.astype(float)]
    for j in range(1, m):
        cols.append((t % m == j).astype(float))
    return np.column_stack(cols)
