"""
Seasonal ARIMA over a bounded grid, fitted by conditional sum of squares.

Differencing orders are chosen first, as in Hyndman and Khandakar's
automatic procedure: D = 1 when the STL seasonal strength exceeds 0.64,
then d = 1 when a KPSS test rejects level stationarity at 5%. The AR/MA
orders ``p, q in {0, 1, 2}`` and ``P, Q in {0, 1}`` are then selected by
AICc, with every candidate scored on the same residual window so the
values are comparable. A constant is included when ``d + D <= 1``.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import lfilter

from ..exceptions import FitError
from ._common import FittedModel, aicc, as_series, residual_variance

P_GRID = (0, 1, 2)
Q_GRID = (0, 1, 2)
SP_GRID = (0, 1)
SQ_GRID = (0, 1)
SEASONAL_STRENGTH_THRESHOLD = 0.64
KPSS_ALPHA = 0.05
# inverse roots at or beyond this modulus count as explosive / non-invertible
MAX_ROOT = 0.99
_BAD_RESIDUAL = 1e6


@dataclass(eq=False)
class ARIMAModel(FittedModel):
    p: int = 0
    d: int = 0
    q: int = 0
    P: int = 0
    D: int = 0
    Q: int = 0
    season_length: int = 4
    ar: np.ndarray = field(default=None)
    ma: np.ndarray = field(default=None)
    sar: np.ndarray = field(default=None)
    sma: np.ndarray = field(default=None)
    mean: float = 0.0
    y: np.ndarray = field(default=None, repr=False)
    innovations: np.ndarray = field(default=None, repr=False)

    @property
    def orders(self) -> tuple:
        return (self.p, self.d, self.q), (self.P, self.D, self.Q)

    def _polys(self):
        m = self.season_length
        ar = np.convolve(_ar_poly(self.ar), _seasonal(_ar_poly(self.sar), m))
        ma = np.convolve(_ma_poly(self.ma), _seasonal(_ma_poly(self.sma), m))
        return ar, ma

    def forecast(self, h: int):
        m = self.season_length
        ar, ma = self._polys()
        const = ar.sum() * self.mean
        full = ar
        for _ in range(self.d):
            full = np.convolve(full, [1.0, -1.0])
        for _ in range(self.D):
            full = np.convolve(full, _seasonal(np.array([1.0, -1.0]), m))
        y = list(self.y)
        e = list(self.innovations)
        n = len(y)
        for t in range(n, n + h):
            val = const
            for i in range(1, full.size):
                if t - i >= 0:
                    val -= full[i] * y[t - i]
            for j in range(1, ma.size):
                if 0 <= t - j < len(e):
                    val += ma[j] * e[t - j]
            y.append(val)
            e.append(0.0)
        point = np.array(y[n:])
        psi = np.zeros(h)
        psi[0] = 1.0
        for j in range(1, h):
            acc = ma[j] if j < ma.size else 0.0
            for i in range(1, min(j, full.size - 1) + 1):
                acc -= full[i] * psi[j - i]
            psi[j] = acc
        return point, np.cumsum(psi**2)


def _ar_poly(phi) -> np.ndarray:
    return np.concatenate([[1.0], -np.asarray(phi, dtype=float)])


def _ma_poly(theta) -> np.ndarray:
    return np.concatenate([[1.0], np.asarray(theta, dtype=float)])


def _seasonal(poly: np.ndarray, m: int) -> np.ndarray:
    """Spread a polynomial in B onto B**m."""
    out = np.zeros((poly.size - 1) * m + 1)
    out[::m] = poly
    return out


def _difference(y: np.ndarray, d: int, D: int, m: int) -> np.ndarray:
    w = y
    for _ in range(D):
        w = w[m:] - w[:-m]
    for _ in range(d):
        w = np.diff(w)
    return w


def _is_flat(x: np.ndarray) -> bool:
    return x.size == 0 or np.ptp(x) <= 1e-10 * (1.0 + np.abs(x).max())


def seasonal_strength(y: np.ndarray, m: int) -> float:
    """``max(0, 1 - Var(remainder) / Var(season + remainder))`` from an STL fit."""
    if m < 2 or y.size < 2 * m + 1 or _is_flat(y):
        return 0.0
    from statsmodels.tsa.seasonal import STL

    res = STL(y, period=m, robust=False).fit()
    denom = np.var(res.seasonal + res.resid)
    if denom <= 0:
        return 0.0
    return float(max(0.0, 1.0 - np.var(res.resid) / denom))


def kpss_rejects(x: np.ndarray, alpha: float = KPSS_ALPHA) -> bool:
    """True when KPSS rejects level stationarity."""
    if x.size < 8 or _is_flat(x):
        return False
    from statsmodels.tsa.stattools import kpss

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        # short truncation lag, as in the usual automatic ARIMA procedure
        _, pvalue, *_ = kpss(x, regression="c", nlags=int(4 * (x.size / 100) ** 0.25))
    return bool(pvalue < alpha)


def choose_differencing(y: np.ndarray, m: int) -> tuple[int, int]:
    D = int(m > 1 and seasonal_strength(y, m) > SEASONAL_STRENGTH_THRESHOLD)
    w = _difference(y, 0, D, m)
    d = int(kpss_rejects(w))
    return d, D


def _stable(poly: np.ndarray) -> bool:
    if poly.size <= 1 or not np.any(poly[1:]):
        return True
    return bool(np.abs(np.roots(poly)).max() < MAX_ROOT)


def _fit_one(w, m, p, q, P, Q, const, start):
    n_coef = p + q + P + Q + int(const)
    n_res = w.size - start
    if n_res <= n_coef + 1:
        return None

    def unpack(x):
        i = 0
        ar = x[i:i + p]; i += p
        ma = x[i:i + q]; i += q
        sar = x[i:i + P]; i += P
        sma = x[i:i + Q]; i += Q
        mu = x[i] if const else 0.0
        return ar, ma, sar, sma, mu

    def resid(x):
        ar, ma, sar, sma, mu = unpack(x)
        a = np.convolve(_ar_poly(ar), _seasonal(_ar_poly(sar), m))
        b = np.convolve(_ma_poly(ma), _seasonal(_ma_poly(sma), m))
        with np.errstate(all="ignore"):
            e = lfilter(a, b, w - mu)
        e = e[start:]
        if not np.all(np.isfinite(e)) or np.abs(e).max() > _BAD_RESIDUAL:
            return np.full(e.size, _BAD_RESIDUAL)
        return e

    x0 = np.zeros(n_coef)
    if const:
        x0[-1] = w.mean()
    if n_coef:
        sol = least_squares(resid, x0, method="lm", xtol=1e-10, ftol=1e-10)
        x = sol.x
    else:
        x = x0
    ar, ma, sar, sma, mu = unpack(x)
    m_ar = np.convolve(_ar_poly(ar), _seasonal(_ar_poly(sar), m))
    m_ma = np.convolve(_ma_poly(ma), _seasonal(_ma_poly(sma), m))
    if not (_stable(m_ar) and _stable(m_ma)):
        return None
    e = resid(x)
    if np.abs(e).max() >= _BAD_RESIDUAL:
        return None
    return (ar, ma, sar, sma, mu), e, n_coef


def fit_arima_grid(series) -> ARIMAModel:
    """Select and fit a seasonal ARIMA model on the bounded grid.

    Raises FitError listing every attempted order when no candidate is
    stationary and invertible.
    """
    s = as_series(series)
    y, m = s.values, s.season_length
    if y.size < 2 * m + 4:
        raise FitError(f"ARIMA needs at least {2 * m + 4} observations, got {y.size}")
    d, D = choose_differencing(y, m)
    w = _difference(y, d, D, m)
    const = d + D <= 1
    start = max(P_GRID) + max(SP_GRID) * m
    attempts = []
    best = None
    for p, q, P, Q in itertools.product(P_GRID, Q_GRID, SP_GRID, SQ_GRID):
        label = f"({p},{d},{q})({P},{D},{Q})[{m}]"
        fit = _fit_one(w, m, p, q, P, Q, const, start)
        if fit is None:
            attempts.append(f"{label}: rejected")
            continue
        params, e, n_coef = fit
        score = aicc(e, n_coef)
        attempts.append(f"{label}: AICc={score:.3f}")
        key = (score, n_coef)
        if best is None or key < best[0]:
            best = (key, (p, q, P, Q), params, e, n_coef, label)
    if best is None:
        raise FitError("no ARIMA candidate was stationary and invertible:\n" + "\n".join(attempts))
    _, (p, q, P, Q), (ar, ma, sar, sma, mu), e, n_coef, label = best

    # innovations on the original time axis, zero where differencing ate the data
    offset = d + D * m
    innov = np.zeros(y.size)
    ar_full = np.convolve(_ar_poly(ar), _seasonal(_ar_poly(sar), m))
    ma_full = np.convolve(_ma_poly(ma), _seasonal(_ma_poly(sma), m))
    innov[offset:] = lfilter(ar_full, ma_full, w - mu)
    return ARIMAModel(
        family="arima",
        order=label,
        residuals=e,
        n_params=n_coef,
        sigma2=residual_variance(e, n_coef),
        p=p, d=d, q=q, P=P, D=D, Q=Q,
        season_length=m,
        ar=np.asarray(ar), ma=np.asarray(ma), sar=np.asarray(sar), sma=np.asarray(sma),
        mean=float(mu),
        y=y.copy(),
        innovations=innov,
    )
