import io
import json

import numpy as np
import pytest

from labourflows import (
    GeneratorMatrix,
    SimulationSpec,
    StateSpace,
    Table,
    count_transitions,
    emit_table,
    load_panel,
    simulate_panel,
    write_counts,
    write_panel,
)
from labourflows.exceptions import DuplicateRecordError, ParseError
from labourflows.io import format_value

from conftest import FIVE_STATES

LABELS = ("SE", "FT", "PE", "U", "IN")


def write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_two_row_panel(tmp_path):
    p = write(tmp_path, "id,period,state\na,2018Q1,U\na,2018Q2,PE\n")
    panel = load_panel(p, "panel", LABELS)
    assert panel.periods == ("2018Q1", "2018Q2")
    C = count_transitions(panel, "2018Q1", "2018Q2").counts
    assert C.sum() == 1 and C[FIVE_STATES.index("U"), FIVE_STATES.index("PE")] == 1


def test_counts_row(tmp_path):
    p = write(tmp_path, "period,from,to,count\n2018Q1,U,PE,731\n2018Q2,U,U,5\n")
    first, second = load_panel(p, "counts", LABELS)
    assert first.counts[3, 2] == 731 and first.counts.sum() == 731
    assert first.to_period == "2018Q2" and second.to_period is None


def test_unknown_state_names_label_and_line(tmp_path):
    p = write(tmp_path, "id,period,state\na,2018Q1,U\na,2018Q2,XX\n")
    with pytest.raises(ParseError) as exc:
        load_panel(p, "panel", LABELS)
    assert "XX" in str(exc.value) and exc.value.line == 3 and "3" in str(exc.value)


@pytest.mark.parametrize("text, line", [
    ("id,period\n", 1),
    ("id,period,state\na,2018Q1\n", 2),
    ("period,from,to,count\n2018Q1,U,PE,-3\n", 2),
    ("period,from,to,count\n2018Q1,U,PE,1.5\n", 2),
])
def test_malformed_rows(tmp_path, text, line):
    fmt = "counts" if text.startswith("period") else "panel"
    with pytest.raises(ParseError) as exc:
        load_panel(write(tmp_path, text), fmt, LABELS)
    assert exc.value.line == line


def test_duplicates(tmp_path):
    p = write(tmp_path, "id,period,state\na,2018Q1,U\nb,2018Q1,U\na,2018Q1,PE\n")
    with pytest.raises(DuplicateRecordError) as exc:
        load_panel(p, "panel", LABELS)
    assert exc.value.line == 4
    p = write(tmp_path, "period,from,to,count\n2018Q1,U,PE,1\n2018Q1,U,PE,2\n", "c.csv")
    with pytest.raises(DuplicateRecordError):
        load_panel(p, "counts", LABELS)


def test_period_order_file(tmp_path):
    p = write(tmp_path, "id,period,state\na,Q2-2018,U\na,Q1-2019,PE\na,Q4-2018,SE\n")
    order = write(tmp_path, "Q2-2018\nQ4-2018\nQ1-2019\n", "order.txt")
    assert load_panel(p, "panel", LABELS).periods == ("Q1-2019", "Q2-2018", "Q4-2018")
    assert load_panel(p, "panel", LABELS, period_order=order).periods == ("Q2-2018", "Q4-2018", "Q1-2019")
    short = write(tmp_path, "Q2-2018\n", "short.txt")
    with pytest.raises(ParseError):
        load_panel(p, "panel", LABELS, period_order=short)


def test_missing_cells_are_allowed(tmp_path):
    p = write(tmp_path, "id,period,state\na,2018Q1,U\nb,2018Q2,PE\n")
    panel = load_panel(p, "panel", LABELS)
    assert panel.states.tolist() == [[3, -1], [-1, 2]]


def test_panel_round_trip(tmp_path, rates_2018):
    Q = GeneratorMatrix(0.25 * rates_2018.entries, rates_2018.space)
    panel = simulate_panel(SimulationSpec(Q, 500, 6, [0.2] * 5, seed=1))
    write_panel(panel, tmp_path / "p.csv")
    back = load_panel(tmp_path / "p.csv", "panel", FIVE_STATES)
    assert back.ids == panel.ids and back.periods == panel.periods
    np.testing.assert_array_equal(back.states, panel.states)


def test_counts_round_trip(tmp_path, rates_2018):
    panel = simulate_panel(SimulationSpec(rates_2018, 300, 4, [0.2] * 5, seed=2))
    counts = [count_transitions(panel, a, b) for a, b in zip(panel.periods[:-1], panel.periods[1:])]
    write_counts(counts, tmp_path / "c.csv")
    back = load_panel(tmp_path / "c.csv", "counts", LABELS)
    assert len(back) == 3
    for a, b in zip(counts, back):
        np.testing.assert_array_equal(a.counts, b.counts)


def test_emit_small_table(tmp_path):
    t = Table(("a", "b"), [(1, 0.5), (2, 1 / 3)])
    emit_table(t, tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_bytes() == b"a,b\n1,0.5\n2,0.333333\n"


def test_emit_is_byte_identical(tmp_path):
    rng = np.random.default_rng(0)
    t = Table(("x", "y", "z"), [tuple(rng.normal(size=3)) for _ in range(20)])
    emit_table(t, tmp_path / "1.csv")
    emit_table(t, tmp_path / "2.csv")
    assert (tmp_path / "1.csv").read_bytes() == (tmp_path / "2.csv").read_bytes()


def test_missing_values_are_na():
    buf = io.StringIO()
    emit_table(Table(("q", "note"), [(float("nan"), None), (np.float64(-0.0), "x")]), buf)
    assert buf.getvalue() == "q,note\nNA,NA\n0,x\n"


@pytest.mark.parametrize("value, text", [
    (1234567.0, "1.23457e+06"), (0.000123456789, "0.000123457"), (True, "true"),
    (np.int64(7), "7"), (float("inf"), "Inf"), (-float("inf"), "-Inf"), ("U", "U"),
])
def test_format_value(value, text):
    assert format_value(value) == text


def test_json_output(tmp_path):
    emit_table(Table(("state", "share"), [("U", 0.07), ("IN", float("nan"))]), tmp_path / "t.json", "json")
    assert json.loads((tmp_path / "t.json").read_text()) == [
        {"state": "U", "share": 0.07}, {"state": "IN", "share": None}
    ]


def test_table_shape_checked():
    with pytest.raises(ValueError):
        Table(("a", "b"), [(1,)])
    with pytest.raises(ValueError):
        emit_table(Table(("a",)), io.StringIO(), "xml")


def test_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        emit_table(Table(("a",), [(1,)]), tmp_path / "missing" / "t.csv")


def test_space_object_accepted(tmp_path):
    p = write(tmp_path, "id,period,state\na,1,E\na,2,U\n")
    assert load_panel(p, "panel", StateSpace(("E", "U"))).space.K == 2
