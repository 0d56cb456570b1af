import numpy as np
import pytest

from labourflows import (
    GeneratorMatrix,
    StateSpace,
    TransitionCounts,
    bootstrap_equilibrium,
    bootstrap_generator,
    bootstrap_individuals,
    bootstrap_seasonal,
    equilibrium,
    pairwise_difference_test,
    pairwise_equilibrium_tests,
    pairwise_generator_tests,
    SimulationSpec,
    simulate_panel,
    count_transitions,
)
from labourflows import inference
from labourflows.exceptions import ConvergenceError, EmptyRowError
from labourflows.inference import BootstrapResult

TWO = StateSpace(("A", "B"))


def records(n00, n01, n10, n11):
    r = [(0, 0)] * n00 + [(0, 1)] * n01 + [(1, 0)] * n10 + [(1, 1)] * n11
    return np.array(r, dtype=np.int64)


def test_identical_stayers_have_zero_se():
    recs = np.array([(0, 0)] * 40 + [(1, 1)] * 60)
    res = bootstrap_generator(recs, 50, seed=1)
    np.testing.assert_array_equal(res.se, 0.0)


def test_single_draw_has_zero_se():
    res = bootstrap_generator(records(70, 30, 20, 80), 1, seed=3)
    np.testing.assert_array_equal(res.se, 0.0)
    assert len(res.draws) == 1


def test_deterministic_given_seed():
    recs = records(700, 300, 200, 800)
    a = bootstrap_generator(recs, 100, seed=9)
    b = bootstrap_generator(recs, 100, seed=9)
    np.testing.assert_array_equal(a.raw_draws, b.raw_draws)
    np.testing.assert_array_equal(a.se, b.se)
    c = bootstrap_generator(recs, 100, seed=10)
    assert not np.array_equal(a.se, c.se)


def test_invariant_to_record_order(rng):
    recs = records(700, 300, 200, 800)
    a = bootstrap_generator(recs, 100, seed=2)
    b = bootstrap_generator(recs[rng.permutation(len(recs))], 100, seed=2)
    np.testing.assert_array_equal(a.se, b.se)


def test_labelled_records_and_counts_agree():
    recs = records(70, 30, 20, 80)
    labelled = [("AB"[i], "AB"[j]) for i, j in recs]
    a = bootstrap_generator(labelled, 30, seed=4, space=TWO)
    C = TransitionCounts(np.array([[70, 30], [20, 80]]), TWO)
    b = bootstrap_generator(C, 30, seed=4)
    np.testing.assert_array_equal(a.se, b.se)


def test_se_uses_population_divisor():
    res = bootstrap_generator(records(70, 30, 20, 80), 40, seed=5)
    raw = res.raw_draws
    np.testing.assert_allclose(res.se, raw.std(axis=0, ddof=0), rtol=1e-12)
    assert np.all(res.se >= 0)


def test_draws_are_valid_generators():
    res = bootstrap_generator(records(700, 300, 5, 995), 50, seed=6, method="redistribute")
    for Q in res.draws:
        assert Q.entries[~np.eye(2, dtype=bool)].min() >= 0


def test_empty_row_draws_are_redrawn():
    # three records, one per state: most draws miss a state
    recs = np.array([(0, 0), (1, 1), (2, 2)])
    res = bootstrap_generator(recs, 20, seed=0)
    assert res.attempts > 20 and len(res.draws) == 20


def test_redraw_cap(monkeypatch):
    def always_empty(C, cfg):
        raise EmptyRowError(0)

    recs = records(10, 5, 5, 10)
    real = inference._raw_generator
    calls = {"n": 0}

    def first_ok(C, cfg):
        calls["n"] += 1
        return real(C, cfg) if calls["n"] == 1 else always_empty(C, cfg)

    monkeypatch.setattr(inference, "_raw_generator", first_ok)
    with pytest.raises(ConvergenceError):
        bootstrap_generator(recs, 5, seed=0)
    assert calls["n"] == 1 + 10 * 5


def test_argument_errors():
    with pytest.raises(ValueError):
        bootstrap_generator(records(1, 0, 0, 1), 0, seed=0)
    with pytest.raises(ValueError):
        bootstrap_generator(np.array([(0, 0)]), 10, seed=0, space=TWO)


def _result_from_draws(mats):
    Gs = [GeneratorMatrix(m) for m in mats]
    raw = np.array(mats)
    return BootstrapResult(len(mats), Gs[0], raw.std(axis=0), Gs, raw, 0, len(mats))


def test_equilibrium_se_identical_draws():
    Q = [[-0.3, 0.3], [0.2, -0.2]]
    eq = bootstrap_equilibrium(_result_from_draws([Q] * 10))
    np.testing.assert_allclose(eq.se, 0.0, atol=1e-15)


def test_equilibrium_se_two_valued_draws():
    # pi_1 = q21 / (q12 + q21); with q21 = 0.3 and q12 in {0.2, 0.4}
    mats = [[[-0.2, 0.2], [0.3, -0.3]], [[-0.4, 0.4], [0.3, -0.3]]] * 5
    eq = bootstrap_equilibrium(_result_from_draws(mats))
    a, b = 0.3 / 0.5, 0.3 / 0.7
    assert eq.se[0] == pytest.approx(abs(a - b) / 2, abs=1e-12)
    assert eq.se[1] == pytest.approx(abs(a - b) / 2, abs=1e-12)
    assert eq.n_skipped == 0


def test_equilibrium_skips_reducible_draws():
    mats = [[[-0.2, 0.2], [0.3, -0.3]]] * 3 + [[[0.0, 0.0], [0.0, 0.0]]]
    eq = bootstrap_equilibrium(_result_from_draws(mats))
    assert eq.n_skipped == 1 and len(eq.draws) == 3


def test_pairwise_identical_draws(rng):
    d = rng.normal(size=200)
    assert pairwise_difference_test(d, d, 0.4, 0.4).p_value == 1.0


def test_pairwise_far_difference(rng):
    a, b = rng.normal(size=200), rng.normal(size=200)
    spread = np.abs((a - b) - (a - b).mean()).max()
    t = pairwise_difference_test(a, b, 10 * spread, 0.0)
    assert t.p_value == 0.0 and t.statistic == pytest.approx(10 * spread)


def test_pairwise_symmetry(rng):
    a, b = rng.normal(size=300), rng.normal(0.1, 1.2, size=300)
    assert pairwise_difference_test(a, b, 0.3, 0.1).p_value == pairwise_difference_test(b, a, 0.1, 0.3).p_value


def test_pairwise_errors():
    with pytest.raises(ValueError):
        pairwise_difference_test([], [], 0, 0)
    with pytest.raises(ValueError):
        pairwise_difference_test([1, 2], [1], 0, 0)


@pytest.mark.slow
def test_null_rejection_rate():
    Q = np.array([[-0.3, 0.3], [0.2, -0.2]])
    P = np.eye(2) + (np.exp(-0.5) - 1) / -0.5 * Q  # two-state matrix exponential
    rng = np.random.default_rng(77)
    rejections = 0
    reps = 200
    for r in range(reps):
        res = []
        for _ in range(2):
            n0 = rng.binomial(2000, 0.4)
            row0 = rng.multinomial(n0, P[0])
            row1 = rng.multinomial(2000 - n0, P[1])
            C = TransitionCounts(np.vstack([row0, row1]), TWO)
            res.append(bootstrap_generator(C, 200, seed=int(rng.integers(2**31))))
        p = pairwise_generator_tests(*res)[0, 1]
        rejections += p < 0.05
    assert 0.01 <= rejections / reps <= 0.12


def test_seasonal_bootstrap_sums_seasons(rates_2018):
    quarterly = GeneratorMatrix(0.25 * rates_2018.entries, rates_2018.space)
    panel = simulate_panel(SimulationSpec(quarterly, 4000, 5, equilibrium(rates_2018).shares, seed=1))
    counts = [count_transitions(panel, a, b) for a, b in zip(panel.periods[:-1], panel.periods[1:])]
    res = bootstrap_seasonal(counts, 20, seed=1)
    singles = [bootstrap_generator(c, 2, seed=1).point for c in counts]
    # point estimate is the sum of the per-season estimates (before regularising)
    assert np.abs(res.raw_draws.mean(axis=0) - sum(Q.entries for Q in singles)).max() < 0.15
    assert res.se.shape == (5, 5) and np.all(res.se[~np.eye(5, dtype=bool)] > 0)


def test_individual_bootstrap(rates_2018):
    panel = simulate_panel(SimulationSpec(rates_2018, 4000, 5, equilibrium(rates_2018).shares, seed=2))
    res = bootstrap_individuals(panel, panel.periods, 20, seed=3)
    again = bootstrap_individuals(panel, panel.periods, 20, seed=3)
    np.testing.assert_array_equal(res.se, again.se)
    one = bootstrap_individuals(panel, panel.periods[:2], 20, seed=3)
    C = count_transitions(panel, panel.periods[0], panel.periods[1])
    np.testing.assert_allclose(one.point.entries, bootstrap_generator(C, 1, seed=0).point.entries, atol=1e-12)
    with pytest.raises(ValueError):
        bootstrap_individuals(panel, [panel.periods[0], panel.periods[2]], 5, seed=0)


def test_pairwise_equilibrium_shape(rates_2018):
    recs = records(700, 300, 200, 800)
    a = bootstrap_equilibrium(bootstrap_generator(recs, 50, seed=1))
    b = bootstrap_equilibrium(bootstrap_generator(recs, 50, seed=2))
    p = pairwise_equilibrium_tests(a, b)
    assert p.shape == (2,) and np.all((0 <= p) & (p <= 1))
    assert p[0] > 0.5  # same population, observed difference zero
