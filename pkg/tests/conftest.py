import numpy as np
import pytest

from labourflows import GeneratorMatrix, StateSpace

FIVE_STATES = StateSpace(("SE", "FT", "PE", "U", "IN"))

# Annual off-diagonal rates, rounded to three decimals, from the published
# 2018 QII (a) and 2019 QII (b) estimates; state order SE, FT, PE, U, IN.
RATES_2018 = np.array([
    [0.000, 0.031, 0.056, 0.050, 0.084],
    [0.026, 0.000, 0.257, 0.419, 0.351],
    [0.020, 0.037, 0.000, 0.034, 0.046],
    [0.109, 0.659, 0.109, 0.000, 2.371],
    [0.025, 0.091, 0.031, 0.471, 0.000],
])
RATES_2019 = np.array([
    [0.000, 0.026, 0.048, 0.037, 0.081],
    [0.030, 0.000, 0.390, 0.414, 0.326],
    [0.021, 0.039, 0.000, 0.027, 0.051],
    [0.088, 0.670, 0.105, 0.000, 2.561],
    [0.024, 0.092, 0.028, 0.440, 0.000],
])
# published equilibrium shares for the two matrices above
SHARES_2018 = np.array([0.119, 0.091, 0.357, 0.070, 0.363])
SHARES_2019 = np.array([0.126, 0.078, 0.381, 0.060, 0.356])


def random_generator(rng, K, scale=1.0):
    """Random dense generator with max |q_ij| equal to `scale`."""
    off = rng.uniform(0.0, 1.0, (K, K))
    np.fill_diagonal(off, 0.0)
    Q = off - np.diag(off.sum(axis=1))
    return Q * (scale / np.abs(Q).max())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def rates_2018():
    return GeneratorMatrix.from_offdiagonal(RATES_2018, FIVE_STATES)


@pytest.fixture
def rates_2019():
    return GeneratorMatrix.from_offdiagonal(RATES_2019, FIVE_STATES)


# one line per acceptance criterion, printed after the test run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
