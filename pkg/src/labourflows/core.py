"""
Domain types shared by every module: state spaces, count matrices,
stochastic and generator matrices, share vectors and panel datasets.

All matrices follow the row-vector convention: shares multiply from the
left, ``pi_dot = pi @ Q``. Every array stored on a type is made read-only
so instances can be shared freely.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Any, Hashable, Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .exceptions import (
    DimensionError,
    DuplicateRecordError,
    EmptyCountsWarning,
    InvalidGeneratorError,
    InvalidSharesError,
    InvalidStochasticError,
)

DEFAULT_TOL = 1e-10
# magnitudes below this are rounding residue and snapped to exact zero
ZERO_CLAMP = 1e-14

__all__ = [
    "DEFAULT_TOL",
    "StateSpace",
    "TransitionCounts",
    "StochasticMatrix",
    "GeneratorMatrix",
    "ShareVector",
    "PanelDataset",
    "GeneratorDiagnostics",
    "StochasticDiagnostics",
    "validate_generator",
    "validate_stochastic",
]


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _square(M) -> np.ndarray:
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    return A


def _clamp(a: np.ndarray) -> np.ndarray:
    a = a.copy()
    a[np.abs(a) < ZERO_CLAMP] = 0.0
    return a


@dataclass(frozen=True)
class StateSpace:
    """Ordered set of labour market states, e.g. ``("SE", "FT", "PE", "U", "IN")``."""

    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        if len(labels) < 2:
            raise DimensionError("a state space needs at least two states")
        if any(not x for x in labels):
            raise ValueError("state labels must be nonempty")
        if len(set(labels)) != len(labels):
            raise ValueError(f"state labels must be unique: {labels}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_index", {lab: i for i, lab in enumerate(labels)})

    @property
    def K(self) -> int:
        return len(self.labels)

    def __len__(self):
        return len(self.labels)

    def __iter__(self) -> Iterator[str]:
        return iter(self.labels)

    def __contains__(self, label) -> bool:
        return label in self._index

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"unknown state {label!r}; known states are {self.labels}") from None

    def label(self, i: int) -> str:
        return self.labels[i]

    def resolve(self, state) -> int:
        """Index of `state`, given either as a label or as an integer index."""
        if isinstance(state, (int, np.integer)) and not isinstance(state, bool):
            if not 0 <= state < self.K:
                raise IndexError(f"state index {state} out of range for K={self.K}")
            return int(state)
        return self.index(state)

    @classmethod
    def default(cls, K: int) -> "StateSpace":
        return cls(tuple(f"s{i}" for i in range(K)))


def _space_for(space, K):
    if space is None:
        return StateSpace.default(K)
    if not isinstance(space, StateSpace):
        space = StateSpace(tuple(space))
    if space.K != K:
        raise DimensionError(f"state space has {space.K} states but matrix is {K}x{K}")
    return space


class GeneratorDiagnostics(NamedTuple):
    is_valid: bool
    worst_negative_offdiag: float
    max_row_sum_abs: float


class StochasticDiagnostics(NamedTuple):
    is_valid: bool
    max_row_sum_error: float
    worst_out_of_range: float


def validate_generator(M, tol: float = DEFAULT_TOL) -> GeneratorDiagnostics:
    """Check the conservative-generator conditions on a square matrix.

    ``worst_negative_offdiag`` is the most negative off-diagonal entry (0.0
    when there is none) and ``max_row_sum_abs`` the largest absolute row sum.
    """
    A = _square(M)
    off = A[~np.eye(A.shape[0], dtype=bool)]
    worst = float(min(off.min(initial=0.0), 0.0))
    row = float(np.abs(A.sum(axis=1)).max())
    diag_ok = bool(np.all(np.diag(A) <= tol))
    ok = bool(np.all(np.isfinite(A))) and worst >= -tol and row <= tol and diag_ok
    return GeneratorDiagnostics(ok, worst, row)


def validate_stochastic(M, tol: float = DEFAULT_TOL) -> StochasticDiagnostics:
    """Check that rows sum to one and entries lie in [0, 1], both within `tol`."""
    A = _square(M)
    row = float(np.abs(A.sum(axis=1) - 1.0).max())
    below = float(np.max(-A, initial=0.0))
    above = float(np.max(A - 1.0, initial=0.0))
    out = max(below, above, 0.0)
    ok = bool(np.all(np.isfinite(A))) and row <= tol and out <= tol
    return StochasticDiagnostics(ok, row, out)


class _LabelledMatrix:
    space: StateSpace
    entries: np.ndarray

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.entries
        return self.entries.astype(dtype)

    @property
    def K(self) -> int:
        return self.space.K

    def __getitem__(self, key):
        if isinstance(key, tuple) and len(key) == 2:
            i, j = key
            if isinstance(i, str) or isinstance(j, str):
                return self.entries[self.space.resolve(i), self.space.resolve(j)]
        return self.entries[key]


@dataclass(frozen=True, eq=False)
class GeneratorMatrix(_LabelledMatrix):
    """Instantaneous transition-rate matrix: off-diagonals >= 0, rows sum to zero."""

    entries: np.ndarray
    space: StateSpace = None
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        A = _clamp(_square(self.entries))
        object.__setattr__(self, "space", _space_for(self.space, A.shape[0]))
        diag = validate_generator(A, self.tol)
        if not diag.is_valid:
            raise InvalidGeneratorError(
                f"not a valid generator (worst negative off-diagonal {diag.worst_negative_offdiag:.3g}, "
                f"max |row sum| {diag.max_row_sum_abs:.3g}, tol {self.tol:g})"
            )
        object.__setattr__(self, "entries", _frozen(A))

    @classmethod
    def from_offdiagonal(cls, rates, space=None, tol: float = DEFAULT_TOL) -> "GeneratorMatrix":
        """Build a generator from off-diagonal rates; the diagonal is recomputed."""
        A = _square(rates).copy()
        np.fill_diagonal(A, 0.0)
        np.fill_diagonal(A, -A.sum(axis=1))
        return cls(A, space, tol)

    def exit_rates(self) -> np.ndarray:
        return -np.diag(self.entries)

    def __repr__(self):
        return f"GeneratorMatrix(space={self.space.labels}, entries=\n{self.entries!r})"


@dataclass(frozen=True, eq=False)
class StochasticMatrix(_LabelledMatrix):
    """Discrete-time transition probability matrix; rows sum to one."""

    entries: np.ndarray
    space: StateSpace = None
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        A = _clamp(_square(self.entries))
        object.__setattr__(self, "space", _space_for(self.space, A.shape[0]))
        diag = validate_stochastic(A, self.tol)
        if not diag.is_valid:
            raise InvalidStochasticError(
                f"not a valid stochastic matrix (max row-sum error {diag.max_row_sum_error:.3g}, "
                f"worst out-of-range {diag.worst_out_of_range:.3g}, tol {self.tol:g})"
            )
        object.__setattr__(self, "entries", _frozen(A))

    def __repr__(self):
        return f"StochasticMatrix(space={self.space.labels}, entries=\n{self.entries!r})"


@dataclass(frozen=True, eq=False)
class ShareVector:
    """Shares of the working-age population across states (nonnegative, sum to one)."""

    shares: np.ndarray
    space: StateSpace = None
    period: Hashable | None = None
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        s = _clamp(np.asarray(self.shares, dtype=float).ravel())
        object.__setattr__(self, "space", _space_for(self.space, s.size))
        if not np.all(np.isfinite(s)):
            raise InvalidSharesError("shares must be finite")
        if s.min() < -self.tol:
            raise InvalidSharesError(f"negative share {s.min():.3g}")
        if abs(s.sum() - 1.0) > self.tol:
            raise InvalidSharesError(f"shares sum to {s.sum():.12g}, not 1")
        object.__setattr__(self, "shares", _frozen(s))

    def __array__(self, dtype=None, copy=None):
        return self.shares if dtype is None else self.shares.astype(dtype)

    def __getitem__(self, key):
        if isinstance(key, str):
            return self.shares[self.space.index(key)]
        return self.shares[key]

    def __len__(self):
        return self.shares.size

    def __repr__(self):
        parts = ", ".join(f"{lab}={v:.4f}" for lab, v in zip(self.space, self.shares))
        return f"ShareVector({parts}, period={self.period!r})"


@dataclass(frozen=True, eq=False)
class TransitionCounts:
    """Observed moves ``counts[i, j]`` from state i at `period` to j at `to_period`."""

    counts: np.ndarray
    space: StateSpace = None
    period: Hashable | None = None
    to_period: Hashable | None = None

    def __post_init__(self):
        C = np.asarray(self.counts)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise DimensionError(f"counts must be square, got shape {C.shape}")
        if not np.all(np.isfinite(C)) or np.any(C < 0) or np.any(C != np.round(C)):
            raise ValueError("counts must be nonnegative integers")
        object.__setattr__(self, "space", _space_for(self.space, C.shape[0]))
        object.__setattr__(self, "counts", _frozen(C, dtype=np.int64))

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def is_empty(self) -> bool:
        return self.total == 0

    def origin_shares(self) -> ShareVector:
        """Occupancy at the origin period implied by the row totals."""
        m = self.row_totals
        return ShareVector(m / m.sum(), self.space, self.period)

    def __array__(self, dtype=None, copy=None):
        return self.counts if dtype is None else self.counts.astype(dtype)


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """Longitudinal observations of individual states.

    Stored densely: ``states[k, t]`` is the index of the state of individual
    ``ids[k]`` at ``periods[t]``, or -1 when the individual was not observed.
    """

    space: StateSpace
    ids: tuple
    periods: tuple
    states: np.ndarray = field(repr=False)

    def __post_init__(self):
        ids = tuple(str(x) for x in self.ids)
        periods = tuple(self.periods)
        S = np.asarray(self.states)
        if S.shape != (len(ids), len(periods)):
            raise DimensionError(f"states has shape {S.shape}, expected {(len(ids), len(periods))}")
        if len(set(ids)) != len(ids):
            raise ValueError("individual ids must be unique")
        if len(set(periods)) != len(periods):
            raise ValueError("periods must be distinct")
        if S.size and (S.min() < -1 or S.max() >= self.space.K):
            raise ValueError("state index out of range")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "periods", periods)
        object.__setattr__(self, "states", _frozen(S, dtype=np.int16 if self.space.K < 32000 else np.int64))

    @classmethod
    def from_records(
        cls,
        space: StateSpace,
        records: Iterable[tuple[Any, Hashable, str]],
        periods: Sequence[Hashable] | None = None,
    ) -> "PanelDataset":
        """Build from ``(id, period, state_label)`` triples.

        Periods are ordered as given by `periods`, otherwise sorted.
        """
        records = list(records)
        if periods is None:
            periods = sorted({r[1] for r in records})
        pidx = {p: t for t, p in enumerate(periods)}
        id_order: dict[str, int] = {}
        for r in records:
            id_order.setdefault(str(r[0]), len(id_order))
        S = np.full((len(id_order), len(periods)), -1, dtype=np.int64)
        for n, (i, p, s) in enumerate(records):
            k = id_order[str(i)]
            try:
                t = pidx[p]
            except KeyError:
                raise ValueError(f"record {n}: period {p!r} not in period list") from None
            if S[k, t] != -1:
                raise DuplicateRecordError(f"duplicate record for id {i!r} in period {p!r}")
            S[k, t] = space.index(s)
        return cls(space, tuple(id_order), tuple(periods), S)

    @property
    def records(self) -> list[tuple[str, Hashable, str]]:
        out = []
        labels = self.space.labels
        for k, i in enumerate(self.ids):
            for t, p in enumerate(self.periods):
                s = self.states[k, t]
                if s >= 0:
                    out.append((i, p, labels[s]))
        return out

    @property
    def n_individuals(self) -> int:
        return len(self.ids)

    def period_index(self, period) -> int:
        try:
            return self.periods.index(period)
        except ValueError:
            raise KeyError(f"unknown period {period!r}") from None

    def occupancy(self, period) -> np.ndarray:
        col = self.states[:, self.period_index(period)]
        return np.bincount(col[col >= 0], minlength=self.space.K)

    def shares(self, period) -> ShareVector:
        """Observed shares at `period` among individuals observed then."""
        occ = self.occupancy(period)
        if occ.sum() == 0:
            warnings.warn(f"no observations in period {period!r}", EmptyCountsWarning, stacklevel=2)
            raise InvalidSharesError(f"no observations in period {period!r}")
        return ShareVector(occ / occ.sum(), self.space, period)

    def __eq__(self, other):
        if not isinstance(other, PanelDataset):
            return NotImplemented
        return (
            self.space == other.space
            and self.ids == other.ids
            and self.periods == other.periods
            and np.array_equal(self.states, other.states)
        )

    __hash__ = None
