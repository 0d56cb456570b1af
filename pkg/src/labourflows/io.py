"""Reading survey files and writing deterministic report tables.

Two delimited input layouts are understood:

* ``panel``: header ``id,period,state``, one row per person and period;
* ``counts``: header ``period,from,to,count``, the number of people moving
  from ``from`` at ``period`` to ``to`` at the following period.

Output tables use comma-separated text with ``\\n`` line endings, floats
printed with 6 significant digits and ``NA`` for missing values, so two
runs on the same input give byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .core import PanelDataset, StateSpace, TransitionCounts
from .exceptions import DuplicateRecordError, ParseError

PANEL_HEADER = ("id", "period", "state")
COUNTS_HEADER = ("period", "from", "to", "count")
NA = "NA"


def _space(labels) -> StateSpace:
    return labels if isinstance(labels, StateSpace) else StateSpace(tuple(labels))


def read_period_order(path) -> list[str]:
    """One period label per line; blank lines are ignored."""
    with open(path, newline="", encoding="utf-8") as fh:
        periods = [line.strip() for line in fh if line.strip()]
    if len(set(periods)) != len(periods):
        raise ParseError(f"period order file {path} lists a period twice")
    return periods


def _rows(path, header: Sequence[str]):
    """Yield ``(line_number, fields)`` for every data row, checking the header."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise ParseError(f"{path} is empty", line=1) from None
        got = tuple(h.strip().lower() for h in first)
        if got != tuple(header):
            raise ParseError(f"expected header {','.join(header)}, got {','.join(first)}", line=1)
        for row in reader:
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=reader.line_num)
            yield reader.line_num, [f.strip() for f in row]


def _state(space: StateSpace, label: str, line: int) -> int:
    if label not in space:
        raise ParseError(f"unknown state {label!r}", line=line)
    return space.index(label)


def _order_periods(seen: Iterable[str], period_order, line_of: dict) -> list[str]:
    seen = set(seen)
    if period_order is None:
        return sorted(seen)
    order = read_period_order(period_order) if isinstance(period_order, (str, os.PathLike)) else list(period_order)
    missing = seen.difference(order)
    if missing:
        p = min(missing, key=lambda x: line_of[x])
        raise ParseError(f"period {p!r} is not in the period order", line=line_of[p])
    return [p for p in order if p in seen]


def load_panel(path, format: str = "panel", labels=None, period_order=None):
    """Read a panel or counts file.

    Parameters
    ----------
    path : path-like
    format : {"panel", "counts"}
    labels : sequence of str or StateSpace
        Allowed state labels, in state-space order.
    period_order : path-like or sequence, optional
        Explicit period ordering; periods are sorted as strings otherwise.

    Returns
    -------
    PanelDataset for ``panel`` files, list of TransitionCounts (one per
    consecutive pair of periods) for ``counts`` files.

    Raises
    ------
    ParseError
        Malformed rows and unknown states, with the offending line number.
    DuplicateRecordError
        A repeated ``(id, period)`` or ``(period, from, to)`` row.
    """
    if labels is None:
        raise ValueError("state labels are required")
    space = _space(labels)
    if format == "panel":
        return _load_panel_rows(path, space, period_order)
    if format == "counts":
        return _load_counts_rows(path, space, period_order)
    raise ValueError(f"unknown input format {format!r} (expected 'panel' or 'counts')")


def _load_panel_rows(path, space, period_order) -> PanelDataset:
    ids: dict[str, int] = {}
    first_line: dict[str, int] = {}
    rows = []
    for line, (pid, period, label) in _rows(path, PANEL_HEADER):
        if not pid or not period:
            raise ParseError("empty id or period", line=line)
        s = _state(space, label, line)
        ids.setdefault(pid, len(ids))
        first_line.setdefault(period, line)
        rows.append((line, pid, period, s))
    periods = _order_periods(first_line, period_order, first_line)
    pidx = {p: t for t, p in enumerate(periods)}
    S = np.full((len(ids), len(periods)), -1, dtype=np.int64)
    for line, pid, period, s in rows:
        k, t = ids[pid], pidx[period]
        if S[k, t] != -1:
            raise DuplicateRecordError(f"duplicate record for id {pid!r} in period {period!r}", line=line)
        S[k, t] = s
    return PanelDataset(space, tuple(ids), tuple(periods), S)


def _load_counts_rows(path, space, period_order) -> list[TransitionCounts]:
    K = space.K
    tables: dict[str, np.ndarray] = {}
    first_line: dict[str, int] = {}
    seen = set()
    for line, (period, a, b, raw) in _rows(path, COUNTS_HEADER):
        i, j = _state(space, a, line), _state(space, b, line)
        try:
            n = int(raw)
        except ValueError:
            raise ParseError(f"count {raw!r} is not an integer", line=line) from None
        if n < 0:
            raise ParseError(f"negative count {n}", line=line)
        if (period, i, j) in seen:
            raise DuplicateRecordError(f"duplicate count for {period}: {a} -> {b}", line=line)
        seen.add((period, i, j))
        first_line.setdefault(period, line)
        tables.setdefault(period, np.zeros((K, K), dtype=np.int64))[i, j] = n
    periods = _order_periods(first_line, period_order, first_line)
    out = []
    for t, p in enumerate(periods):
        nxt = periods[t + 1] if t + 1 < len(periods) else None
        out.append(TransitionCounts(tables[p], space, p, nxt))
    return out


def _write_rows(path, header, rows) -> None:
    if hasattr(path, "write"):
        w = csv.writer(path, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _write_rows(fh, header, rows)


def write_panel(panel: PanelDataset, path) -> None:
    """Write a panel in the ``id,period,state`` layout (missing cells are omitted)."""
    _write_rows(path, PANEL_HEADER, panel.records)


def write_counts(counts: Sequence[TransitionCounts], path) -> None:
    """Write transition counts in the ``period,from,to,count`` layout, zero cells included."""
    rows = []
    for c in counts:
        labels = c.space.labels
        for i, a in enumerate(labels):
            for j, b in enumerate(labels):
                rows.append((c.period, a, b, int(c.counts[i, j])))
    _write_rows(path, COUNTS_HEADER, rows)


@dataclass
class Table:
    """Rows of values under fixed column names."""

    columns: Sequence[str]
    rows: list = field(default_factory=list)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        for r in self.rows:
            self._check(r)

    def _check(self, row):
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} values for {len(self.columns)} columns")

    def append(self, *row) -> None:
        self._check(row)
        self.rows.append(tuple(row))

    def __len__(self):
        return len(self.rows)


def _is_missing(v) -> bool:
    return v is None or (isinstance(v, (float, np.floating)) and math.isnan(v))


def format_value(v) -> str:
    """Text form of one cell: 6 significant digits for floats, NA when missing."""
    if _is_missing(v):
        return NA
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if math.isinf(v):
            return "Inf" if v > 0 else "-Inf"
        # normalise negative zero so equal tables print equally
        return f"{float(v) + 0.0:.6g}"
    return str(v)


def _json_value(v) -> Any:
    if _is_missing(v):
        return None
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(format_value(v)) if math.isfinite(v) else format_value(v)
    return str(v)


def emit_table(table: Table, path, format: str = "delimited") -> Path:
    """Write `table` deterministically as comma-delimited text or JSON records.

    `path` may also be an open text stream.
    """
    if format == "delimited":
        _write_rows(path, table.columns, [[format_value(v) for v in r] for r in table.rows])
    elif format == "json":
        records = [{c: _json_value(v) for c, v in zip(table.columns, r)} for r in table.rows]
        write_json(records, path)
    else:
        raise ValueError(f"unknown table format {format!r}")
    return path


def write_json(obj, path) -> Path:
    """Pretty-printed JSON with a trailing newline; key order is preserved."""
    if hasattr(path, "write"):
        json.dump(obj, path, indent=2, allow_nan=False)
        path.write("\n")
        return path
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_json(obj, fh)
    return Path(path)
