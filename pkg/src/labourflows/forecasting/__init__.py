"""Model-based counterfactual forecasts: TSLR, ETS and seasonal ARIMA, combined with equal weights."""

from ._common import FittedModel, SeasonalSeries, aicc
from .arima import ARIMAModel, fit_arima_grid
from .combine import ForecastResult, Gap, combine_forecasts, counterfactual_gap
from .ets import ETSModel, fit_ets
from .tslr import TSLRModel, fit_tslr

__all__ = [
    "ARIMAModel", "ETSModel", "FittedModel", "ForecastResult", "Gap", "SeasonalSeries",
    "TSLRModel", "aicc", "combine_forecasts", "counterfactual_gap", "fit_arima_grid",
    "fit_ets", "fit_tslr",
]
