import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from labourflows import eigenvalues, matrix_exp, matrix_log_series, solve_linear, validate_stochastic
from labourflows.exceptions import ConvergenceError, DimensionError, NumericError, SingularMatrixError
from labourflows.kernels import SeriesConfig

from conftest import random_generator

Q0 = np.array([[-0.5, 0.5], [0.3, -0.3]])


def two_state_exp(a, b):
    """exp(Q) for the two-state generator [[-a, a], [b, -b]]."""
    Q = np.array([[-a, a], [b, -b]])
    return np.eye(2) + (1 - np.exp(-(a + b))) / (a + b) * Q


def taylor_exp(A, terms=80):
    """Plain high-order Taylor sum, used as an independent oracle for small ||A||."""
    out = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for k in range(1, terms):
        term = term @ A / k
        out = out + term
    return out


def test_exp_of_zero_is_identity():
    np.testing.assert_array_equal(matrix_exp(np.zeros((3, 3))), np.eye(3))


def test_exp_two_state_closed_form():
    E = matrix_exp(Q0)
    np.testing.assert_allclose(E, two_state_exp(0.5, 0.3), atol=1e-14)
    np.testing.assert_allclose(E, taylor_exp(Q0), atol=1e-14)
    # (1 - e^-0.8) / 0.8 = 0.68834, times the rates 0.5 and 0.3
    np.testing.assert_allclose(E, [[0.6558, 0.3442], [0.2065, 0.7935]], atol=5e-5)


def test_exp_matches_scipy_on_large_norm(rng):
    A = random_generator(rng, 5, scale=12.0)
    np.testing.assert_allclose(matrix_exp(A), scipy.linalg.expm(A), atol=1e-12)


def test_exp_rejects_non_finite():
    with pytest.raises(NumericError):
        matrix_exp(np.array([[np.nan, 0.0], [0.0, 0.0]]))


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([2, 3, 5]), st.integers(0, 2**31))
def test_exp_semigroup_and_stochastic(K, seed):
    Q = random_generator(np.random.default_rng(seed), K)
    E = matrix_exp(Q)
    np.testing.assert_allclose(E @ E, matrix_exp(2 * Q), atol=1e-12)
    assert validate_stochastic(E, 1e-9).is_valid


def test_log_of_identity():
    r = matrix_log_series(np.eye(4))
    assert r.converged
    np.testing.assert_array_equal(r.Qtilde, np.zeros((4, 4)))


def test_log_two_state_closed_form():
    P = np.array([[0.8, 0.2], [0.1, 0.9]])
    c = -np.log(0.7) / 0.3
    r = matrix_log_series(P)
    assert r.converged
    np.testing.assert_allclose(r.Qtilde, c * (P - np.eye(2)), atol=1e-13)
    np.testing.assert_allclose(r.Qtilde, [[-0.23778, 0.23778], [0.11889, -0.11889]], atol=5e-6)


def test_log_round_trip_two_state():
    r = matrix_log_series(matrix_exp(Q0))
    np.testing.assert_allclose(r.Qtilde, Q0, atol=1e-10)


def test_log_agrees_with_eigen_logarithm(rng):
    # cross-check only: the package itself never uses an eigen-based log
    Q = random_generator(rng, 5, scale=0.6)
    P = matrix_exp(Q)
    np.testing.assert_allclose(matrix_log_series(P).Qtilde, scipy.linalg.logm(P).real, atol=1e-10)


def test_log_divergence_is_flagged_not_raised():
    # P - I has eigenvalue -2, outside the series' radius of convergence
    P = np.array([[0.0, 1.0], [1.0, 0.0]])
    r = matrix_log_series(P, SeriesConfig(max_terms=200))
    assert not r.converged
    np.testing.assert_allclose(r.Qtilde.sum(axis=1), 0.0, atol=1e-9 * max(1.0, np.abs(r.Qtilde).max()))


def test_log_max_terms_exhausted():
    P = matrix_exp(random_generator(np.random.default_rng(1), 3, scale=2.0))
    r = matrix_log_series(P, SeriesConfig(max_terms=3))
    assert not r.converged and r.terms_used == 3
    np.testing.assert_allclose(r.Qtilde.sum(axis=1), 0.0, atol=1e-9)


def test_series_config_validation():
    with pytest.raises(ValueError):
        SeriesConfig(tol=0)
    with pytest.raises(ValueError):
        SeriesConfig(max_terms=0)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([2, 3, 5]), st.integers(0, 2**31))
def test_log_round_trip_property(K, seed):
    Q = random_generator(np.random.default_rng(seed), K)
    r = matrix_log_series(matrix_exp(Q))
    np.testing.assert_allclose(r.Qtilde.sum(axis=1), 0.0, atol=1e-9)
    if r.converged:
        np.testing.assert_allclose(r.Qtilde, Q, atol=1e-8)


def test_solve_linear_examples():
    np.testing.assert_allclose(solve_linear(np.eye(2), [1, 2]), [1, 2])
    np.testing.assert_allclose(solve_linear(np.diag([2.0, 4.0]), [2, 4]), [1, 1])


def test_solve_linear_round_trip(rng):
    A = rng.normal(size=(5, 5)) + 5 * np.eye(5)
    x = rng.normal(size=5)
    np.testing.assert_allclose(solve_linear(A, x @ A), x, atol=1e-10)


def test_solve_linear_singular():
    with pytest.raises(SingularMatrixError):
        solve_linear(np.array([[1.0, 2.0], [2.0, 4.0]]), [1, 1])
    with pytest.raises(DimensionError):
        solve_linear(np.eye(2), [1, 2, 3])


def test_eigenvalues_examples():
    np.testing.assert_allclose(eigenvalues(np.diag([1.0, 3.0])), [3, 1])
    np.testing.assert_allclose(eigenvalues(Q0), [0, -0.8], atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**31))
def test_eigenvalues_of_generators(K, seed):
    Q = random_generator(np.random.default_rng(seed), K)
    lam = eigenvalues(Q)
    assert abs(lam[0]) < 1e-9
    assert np.all(lam[1:].real <= 1e-9)
    assert abs(lam.sum() - np.trace(Q)) < 1e-9
    # conjugate pairs
    np.testing.assert_allclose(np.sort_complex(lam), np.sort_complex(lam.conj()), atol=1e-9)
    # product of the nonzero eigenvalues equals the sum of principal (K-1)-minors
    minors = sum(np.linalg.det(np.delete(np.delete(Q, i, 0), i, 1)) for i in range(K))
    assert np.prod(lam[1:]).real == pytest.approx(minors, rel=1e-7, abs=1e-12)


def test_eigenvalues_limits():
    with pytest.raises(DimensionError):
        eigenvalues(np.eye(17))
    with pytest.raises(NumericError):
        eigenvalues(np.array([[np.inf, 0.0], [0.0, 1.0]]))
    assert issubclass(ConvergenceError, RuntimeError)
