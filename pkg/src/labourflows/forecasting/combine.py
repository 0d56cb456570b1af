"""Equal-weight forecast combination and the counterfactual gap."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from ..exceptions import FitError
from ._common import SeasonalSeries, as_series
from .arima import fit_arima_grid
from .ets import fit_ets
from .tslr import fit_tslr

Z80 = 1.2816
Z95 = 1.9600

FAMILIES: dict[str, Callable] = {
    "arima": fit_arima_grid,
    "ets": fit_ets,
    "tslr": fit_tslr,
}


@dataclass(frozen=True, eq=False)
class ForecastResult:
    point: np.ndarray
    lower80: np.ndarray
    upper80: np.ndarray
    lower95: np.ndarray
    upper95: np.ndarray
    models_used: list = field(default_factory=list)
    failed: list = field(default_factory=list)
    horizon: int = 0
    residual_sd: float = 0.0
    period_ids: tuple = ()

    @property
    def intervals(self) -> list[dict]:
        return [
            {"lower80": a, "upper80": b, "lower95": c, "upper95": d}
            for a, b, c, d in zip(self.lower80, self.upper80, self.lower95, self.upper95)
        ]


class Gap(NamedTuple):
    gap: float
    outside80: bool | None
    outside95: bool | None

    @property
    def observed(self) -> bool:
        return self.outside95 is not None


def combine_forecasts(series, horizon: int, families: Sequence[str] = ("arima", "ets", "tslr"),
                      season_length: int = 4) -> ForecastResult:
    """Average the point forecasts of every family that fits.

    The interval half-width at horizon h is
    ``z * sqrt(mean_f sigma2_f) * sqrt(mean_f g_f(h))`` where ``g_f(h)`` is
    family f's own variance growth (``var_h / sigma2``), made non-decreasing
    in h. Families that fail to fit are dropped and listed in ``failed``.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    s = as_series(series, season_length)
    names = sorted(set(families))
    unknown = [f for f in names if f not in FAMILIES]
    if unknown:
        raise ValueError(f"unknown model families {unknown}")
    points, growths, sigma2s, used, failed = [], [], [], [], []
    for name in names:
        try:
            model = FAMILIES[name](s)
            pt, g = model.forecast(horizon)
        except (FitError, np.linalg.LinAlgError, ValueError) as exc:
            failed.append((name, str(exc).splitlines()[0]))
            continue
        points.append(pt)
        growths.append(g)
        sigma2s.append(model.sigma2)
        used.append((name, model.order, model.aicc))
    if not points:
        raise FitError("no model family could be fitted: " + "; ".join(f"{n}: {m}" for n, m in failed))
    point = np.mean(points, axis=0)
    sd = float(np.sqrt(np.mean(sigma2s)))
    growth = np.maximum.accumulate(np.mean(growths, axis=0))
    half = sd * np.sqrt(growth)
    ids = _future_ids(s, horizon)
    return ForecastResult(
        point=point,
        lower80=point - Z80 * half,
        upper80=point + Z80 * half,
        lower95=point - Z95 * half,
        upper95=point + Z95 * half,
        models_used=used,
        failed=failed,
        horizon=horizon,
        residual_sd=sd,
        period_ids=ids,
    )


def _future_ids(s: SeasonalSeries, h: int) -> tuple:
    last = s.period_ids[-1] if s.period_ids else -1
    if isinstance(last, (int, np.integer)):
        return tuple(range(int(last) + 1, int(last) + 1 + h))
    return tuple(f"+{k}" for k in range(1, h + 1))


def counterfactual_gap(observed, forecast: ForecastResult) -> list[Gap]:
    """Observed minus forecast per horizon, with interval exceedance flags.

    `observed` may be shorter than the horizon or contain NaN; those
    horizons get ``gap=nan`` and flags set to None (unobserved).
    """
    obs = np.asarray(getattr(observed, "values", observed), dtype=float).ravel()
    if obs.size > forecast.horizon:
        raise ValueError(f"{obs.size} observations for a {forecast.horizon}-step forecast")
    out = []
    for h in range(forecast.horizon):
        if h >= obs.size or not np.isfinite(obs[h]):
            out.append(Gap(float("nan"), None, None))
            continue
        y = obs[h]
        out.append(Gap(
            float(y - forecast.point[h]),
            bool(y < forecast.lower80[h] or y > forecast.upper80[h]),
            bool(y < forecast.lower95[h] or y > forecast.upper95[h]),
        ))
    return out
