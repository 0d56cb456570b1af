"""Acceptance criteria, each run at its stated tolerance.

Every test records one PASS/FAIL line, printed in the terminal summary.
Run on its own with ``python3 -m pytest tests/test_acceptance.py`` or
``python3 tests/test_acceptance.py``.
"""

import filecmp
import json
import sys
import time

import numpy as np
import pytest

from labourflows import (
    GeneratorMatrix,
    SimulationSpec,
    StateSpace,
    StochasticMatrix,
    ThreeStateRates,
    combine_forecasts,
    count_transitions,
    counterfactual_gap,
    decompose_volatility,
    equilibrium,
    estimate_generator,
    estimate_series,
    fitted_shares,
    hp_filter,
    matrix_exp,
    matrix_log_series,
    pairwise_generator_tests,
    bootstrap_generator,
    propagate,
    simulate_panel,
    three_state_generator,
    write_panel,
)
from labourflows.cli import main

from conftest import ACCEPTANCE_LINES, FIVE_STATES, RATES_2018, RATES_2019, SHARES_2018, SHARES_2019, random_generator


def check(n: int, title: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[n] = f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {title} ({detail})"
    assert ok, ACCEPTANCE_LINES[n]


QUARTERLY = GeneratorMatrix.from_offdiagonal(0.25 * RATES_2018, FIVE_STATES)


@pytest.fixture(scope="module")
def recovery_panel():
    spec = SimulationSpec(QUARTERLY, 50_000, 28, equilibrium(QUARTERLY).shares, seed=2024)
    return simulate_panel(spec)


def test_criterion_01_embedding_round_trip():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    converged, worst = 0, 0.0
    for k in range(500):
        K = (2, 3, 5)[k % 3]
        Q = random_generator(rng, K, rng.uniform(0.05, 1.0))
        res = matrix_log_series(matrix_exp(Q))
        if res.converged:
            converged += 1
            worst = max(worst, np.abs(res.Qtilde - Q).max())
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-8 and converged >= 475 and elapsed < 10
    check(1, "embedding round trip", ok,
          f"converged {converged}/500, max error {worst:.1e}, {elapsed:.2f} s")


def test_criterion_02_two_state_closed_form():
    P = np.array([[0.8, 0.2], [0.1, 0.9]])
    est = estimate_generator(StochasticMatrix(P))
    oracle = -np.log(0.7) / 0.3 * (P - np.eye(2))
    err = np.abs(est.Q.entries - oracle).max()
    check(2, "two-state closed form", err < 1e-10, f"max error {err:.1e}")


def _three_state_oracle(a, lam, mu, g, fu, fe):
    # shares as weighted spanning trees into each state (matrix-tree theorem)
    e = fe * (a + g) + a * fu
    u = fu * (lam + mu) + fe * lam
    n = a * mu + g * (lam + mu)
    return np.array([e, u, n]) / (e + u + n)


def test_criterion_03_three_state_equilibrium():
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        r = rng.uniform(0.01, 2.0, 6)
        pi = equilibrium(three_state_generator(ThreeStateRates(*r))).shares.shares
        worst = max(worst, np.abs(pi - _three_state_oracle(*r)).max())
    elapsed = time.perf_counter() - t0
    check(3, "three-state closed form", worst < 1e-12 and elapsed < 1,
          f"max error {worst:.1e}, {elapsed:.3f} s")


def test_criterion_04_published_equilibrium():
    t0 = time.perf_counter()
    errs = []
    for off, target in ((RATES_2018, SHARES_2018), (RATES_2019, SHARES_2019)):
        pi = equilibrium(GeneratorMatrix.from_offdiagonal(off, FIVE_STATES)).shares.shares
        errs.append(np.abs(pi - target).max())
    elapsed = time.perf_counter() - t0
    check(4, "published equilibrium shares", max(errs) <= 0.01 and elapsed < 1,
          f"max deviation (a) {errs[0]:.4f}, (b) {errs[1]:.4f}")


def test_criterion_05_simulator_recovery(recovery_panel):
    t0 = time.perf_counter()
    spec = SimulationSpec(QUARTERLY, 50_000, 28, equilibrium(QUARTERLY).shares, seed=2024)
    panel = simulate_panel(spec)
    ests = estimate_series(panel)
    assert all(e.is_valid for e in ests)
    mean_Q = np.mean([e.Q.entries for e in ests], axis=0)
    q_err = np.abs(mean_Q - QUARTERLY.entries).max()
    occupancy = np.bincount(panel.states.ravel(), minlength=5) / panel.states.size
    eq_err = np.abs(equilibrium(mean_Q).shares.shares - occupancy).max()
    elapsed = time.perf_counter() - t0
    np.testing.assert_array_equal(panel.states, recovery_panel.states)
    check(5, "simulator recovery", q_err < 0.01 and eq_err < 0.005 and elapsed < 60,
          f"mean Q error {q_err:.4f}, equilibrium vs occupancy {eq_err:.4f}, {elapsed:.1f} s")


def _oscillating_world(vary, T=40, amplitude=0.3, period=12):
    s, r = (FIVE_STATES.index(x) for x in vary)
    Qs = []
    for t in range(T):
        off = RATES_2018.copy()
        off[s, r] *= 1 + amplitude * np.sin(2 * np.pi * t / period)
        Qs.append(GeneratorMatrix.from_offdiagonal(off, FIVE_STATES))
    shares = [equilibrium(Qs[0]).shares]
    for Q in Qs:
        shares.append(propagate(shares[-1], Q))
    return Qs, shares


def test_criterion_06_decomposition_attribution():
    t0 = time.perf_counter()
    vary = ("U", "IN")
    Qs, shares = _oscillating_world(vary)
    tab = decompose_volatility(Qs, shares, "U", hp_lambda=1600.0, mode="one_step")
    beta = tab.entries[vary]
    others = max(abs(b) for k, b in tab.entries.items() if k != vary)
    elapsed = time.perf_counter() - t0
    # not gated: slow-exit targets inherit their lagged cycle in one-step mode
    notes = []
    for v, target in ((("FT", "PE"), "FT"), (("IN", "U"), "IN")):
        Qv, sv = _oscillating_world(v)
        leak = {m: max(abs(b) for k, b in decompose_volatility(Qv, sv, target, mode=m).entries.items() if k != v)
                for m in ("one_step", "equilibrium")}
        notes.append(f"{v[0]}->{v[1]} others one-step {leak['one_step']:.3f} / equilibrium {leak['equilibrium']:.3f}")
    ok = 0.9 <= beta <= 1.1 and others <= 0.1 and elapsed < 5
    check(6, "single-rate attribution", ok,
          f"U->IN beta {beta:.3f}, others <= {others:.3f}, {elapsed:.2f} s; diagnostic: " + "; ".join(notes))


def _dense_hp_trend(y, lam):
    n = len(y)
    D = np.diff(np.eye(n), 2, axis=0)
    return np.linalg.solve(np.eye(n) + lam * D.T @ D, y)


def test_criterion_07_hp_filter_exactness():
    y_lin = 0.3 + 0.02 * np.arange(40)
    lin_err = np.abs(hp_filter(y_lin, 1600)[1]).max()
    y8 = np.random.default_rng(7).normal(size=8)
    dense_err = np.abs(hp_filter(y8, 1600)[0] - _dense_hp_trend(y8, 1600)).max()
    check(7, "HP filter exactness", lin_err < 1e-9 and dense_err < 1e-10,
          f"linear cycle {lin_err:.1e}, dense oracle {dense_err:.1e}")


@pytest.mark.slow
def test_criterion_08_bootstrap_calibration():
    t0 = time.perf_counter()
    space = StateSpace(("A", "B"))
    Q = GeneratorMatrix([[-0.3, 0.3], [0.2, -0.2]], space)
    point, se, results = [], [], []
    for k in range(400):
        panel = simulate_panel(SimulationSpec(Q, 10_000, 2, [0.4, 0.6], seed=1000 + k))
        C = count_transitions(panel, panel.periods[0], panel.periods[1])
        res = bootstrap_generator(C, 1000, seed=k)
        point.append(res.point.entries[0, 1])
        se.append(res.se[0, 1])
        results.append(res)
    mc_sd = np.std(point[:200], ddof=1)
    ratio = np.mean(se[:200]) / mc_sd
    # panels 2k and 2k+1 come from the same population: 200 null comparisons
    rejections = np.mean([pairwise_generator_tests(results[2 * k], results[2 * k + 1])[0, 1] < 0.05
                          for k in range(200)])
    elapsed = time.perf_counter() - t0
    ok = abs(ratio - 1) <= 0.3 and 0.01 <= rejections <= 0.12 and elapsed < 300
    check(8, "bootstrap calibration", ok,
          f"se/MC sd {ratio:.3f}, null rejection {rejections:.3f}, {elapsed:.0f} s")


@pytest.mark.slow
def test_criterion_09_forecast_calibration():
    rng = np.random.default_rng(9)
    season = np.array([0.0, 1.0, -1.0, 0.5])
    t = np.arange(48)
    base = 5 + 0.05 * t + season[t % 4]
    flags = []
    for _ in range(200):
        y = base + rng.normal(0, 0.3, 48)
        res = combine_forecasts(y[:40], 8)
        flags += [g.outside95 for g in counterfactual_gap(y[40:], res)]
    rate = float(np.mean(flags))
    res = combine_forecasts(base[:40], 6)
    err = np.abs(res.point - base[40:46]).max()
    check(9, "forecast calibration", 0.01 <= rate <= 0.12 and err < 1e-2,
          f"outside95 rate {rate:.3f}, noiseless 6-step error {err:.1e}")


def test_criterion_10_pipeline_determinism(tmp_path):
    spec = SimulationSpec(QUARTERLY, 5_000, 16, equilibrium(QUARTERLY).shares, seed=10)
    write_panel(simulate_panel(spec), tmp_path / "panel.csv")
    cfg = {"input_path": "panel.csv", "states": list(FIVE_STATES.labels), "bootstrap_B": 20,
           "bootstrap_seed": 5, "forecast_origin": "P011", "horizon": 6}
    (tmp_path / "config.json").write_text(json.dumps(cfg))
    codes = [main(["pipeline", "--config", str(tmp_path / "config.json"),
                   "--output-dir", str(tmp_path / f"run{k}")]) for k in range(2)]
    cmp = filecmp.dircmp(tmp_path / "run0", tmp_path / "run1")
    files = sorted(p.name for p in (tmp_path / "run0").iterdir())
    _, mismatch, errors = filecmp.cmpfiles(tmp_path / "run0", tmp_path / "run1", files, shallow=False)
    ok = codes == [0, 0] and not mismatch and not errors and not cmp.left_only and not cmp.right_only
    check(10, "pipeline determinism", ok, f"{len(files)} files, exit codes {codes}, {len(mismatch)} differ")


def test_criterion_11_fitted_share_fidelity(recovery_panel):
    panel = recovery_panel
    ests = estimate_series(panel)
    occ = [panel.occupancy(p) / panel.occupancy(p).sum() for p in panel.periods]
    fitted = fitted_shares([e.Q for e in ests], occ[:-1])
    obs = np.array(occ[1:])
    fit = np.array([f.shares for f in fitted])
    corr = [np.corrcoef(obs[:, k], fit[:, k])[0, 1] for k in range(5)]
    check(11, "fitted-share fidelity", min(corr) >= 0.95,
          "min correlation " + f"{min(corr):.4f} (" + ", ".join(
              f"{s} {c:.4f}" for s, c in zip(FIVE_STATES.labels, corr)) + ")")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
