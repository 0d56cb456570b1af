"""
Dense kernels for small K x K matrices: matrix exponential, the
alternating log series that maps a stochastic matrix to a candidate
generator, row-vector linear solves and eigenvalues.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .core import StochasticMatrix
from .exceptions import ConvergenceError, DimensionError, NumericError, SingularMatrixError

__all__ = [
    "SeriesConfig",
    "LogSeriesResult",
    "matrix_exp",
    "matrix_log_series",
    "solve_linear",
    "eigenvalues",
]

_TAYLOR_TERMS = 18
_SCALE_TARGET = 0.5
# a partial-sum term this large means the series is diverging
_DIVERGENCE_NORM = 1e4
_PIVOT_RTOL = 1e-13
_MAX_EIG_K = 16


@dataclass(frozen=True)
class SeriesConfig:
    """Termination rule for :func:`matrix_log_series`.

    Summation stops once the infinity norm of the latest term drops below
    `tol`, or after `max_terms` terms.
    """

    tol: float = 1e-14
    max_terms: int = 400

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be at least 1")


class LogSeriesResult(NamedTuple):
    Qtilde: np.ndarray
    terms_used: int
    converged: bool


def _as_square(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    return A


def matrix_exp(A) -> np.ndarray:
    """Matrix exponential by scaling and squaring around a Taylor core.

    The input is scaled by ``2**-s`` so that its infinity norm is at most
    0.5, exponentiated with an 18-term Taylor polynomial (truncation error
    below 1e-20 at that norm), then squared `s` times.
    """
    A = _as_square(A)
    if not np.all(np.isfinite(A)):
        raise NumericError("matrix_exp: input has non-finite entries")
    n = A.shape[0]
    norm = np.abs(A).sum(axis=1).max() if n else 0.0
    s = 0
    if norm > _SCALE_TARGET:
        s = int(np.ceil(np.log2(norm / _SCALE_TARGET)))
    X = A / (2.0**s)

    # Horner form of sum_{k<=m} X^k / k!
    E = np.eye(n)
    for k in range(_TAYLOR_TERMS, 0, -1):
        E = np.eye(n) + (X @ E) / k
    for _ in range(s):
        E = E @ E
    return E


def matrix_log_series(P, cfg: SeriesConfig | None = None) -> LogSeriesResult:
    """Partial sum of ``sum_r (-1)**(r+1) (P - I)**r / r``.

    Every term has zero row sums when P is stochastic, so the output does
    too. When the terms stop shrinking (``(P - I)`` has spectral radius of
    at least one) the sum is returned with ``converged=False`` rather than
    raising; the caller decides what to do with it.

    Parameters
    ----------
    P : StochasticMatrix or array_like
        Square stochastic matrix.
    cfg : SeriesConfig, optional

    Returns
    -------
    LogSeriesResult
        ``(Qtilde, terms_used, converged)``.
    """
    cfg = cfg or SeriesConfig()
    if isinstance(P, StochasticMatrix):
        A = np.array(P.entries)
    else:
        A = _as_square(P)
    n = A.shape[0]
    X = A - np.eye(n)
    total = np.zeros_like(X)
    power = np.eye(n)
    converged = False
    r = 0
    for r in range(1, cfg.max_terms + 1):
        power = power @ X
        term = power / r
        if r % 2 == 0:
            total -= term
        else:
            total += term
        norm = np.abs(term).sum(axis=1).max()
        if norm < cfg.tol:
            converged = True
            break
        if not np.isfinite(norm) or norm > _DIVERGENCE_NORM:
            break
    return LogSeriesResult(total, r, converged)


def solve_linear(A, b) -> np.ndarray:
    """Solve ``x @ A = b`` for the row vector x.

    Uses an LU factorisation with partial pivoting. Raises
    SingularMatrixError when a pivot falls below ``1e-13 * ||A||_inf``.
    """
    A = _as_square(A)
    b = np.asarray(b, dtype=float)
    if b.shape[-1] != A.shape[0]:
        raise DimensionError(f"b has length {b.shape[-1]}, A is {A.shape[0]}x{A.shape[0]}")
    with warnings.catch_warnings():
        # an exactly zero pivot is reported below as SingularMatrixError
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A.T, check_finite=True)
    scale = np.abs(A).sum(axis=1).max()
    if np.min(np.abs(np.diag(lu))) <= _PIVOT_RTOL * scale:
        raise SingularMatrixError("solve_linear: matrix is singular to working precision")
    return scipy.linalg.lu_solve((lu, piv), b.T).T


def eigenvalues(A) -> np.ndarray:
    """Eigenvalues of a small dense matrix, sorted by descending real part.

    Ties in the real part are broken by descending imaginary part so that
    conjugate pairs appear as ``(a + bi, a - bi)``.
    """
    A = _as_square(A)
    if A.shape[0] > _MAX_EIG_K:
        raise DimensionError(f"eigenvalues supports K <= {_MAX_EIG_K}, got {A.shape[0]}")
    if not np.all(np.isfinite(A)):
        raise NumericError("eigenvalues: input has non-finite entries")
    try:
        lam = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"QR iteration did not converge: {exc}") from exc
    lam = lam.astype(complex)
    order = np.lexsort((-lam.imag, -lam.real))
    return lam[order]
