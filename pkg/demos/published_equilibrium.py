# Equilibrium shares of two published annual generators.
#
# The off-diagonal rates below are the rounded annual estimates for the
# Italian labour market in 2018 QII and 2019 QII. Their stationary shares,
# spectral gaps and unemployment rates follow directly.

import numpy as np

from labourflows import GeneratorMatrix, StateSpace, equilibrium, unemployment_rate

states = StateSpace(("SE", "FT", "PE", "U", "IN"))
years = {
    "2018": np.array([
        [0.000, 0.031, 0.056, 0.050, 0.084],
        [0.026, 0.000, 0.257, 0.419, 0.351],
        [0.020, 0.037, 0.000, 0.034, 0.046],
        [0.109, 0.659, 0.109, 0.000, 2.371],
        [0.025, 0.091, 0.031, 0.471, 0.000],
    ]),
    "2019": np.array([
        [0.000, 0.026, 0.048, 0.037, 0.081],
        [0.030, 0.000, 0.390, 0.414, 0.326],
        [0.021, 0.039, 0.000, 0.027, 0.051],
        [0.088, 0.670, 0.105, 0.000, 2.561],
        [0.024, 0.092, 0.028, 0.440, 0.000],
    ]),
}

print("year  " + "  ".join(f"{s:>6}" for s in states.labels) + "   u-rate  half-life")
for year, off in years.items():
    res = equilibrium(GeneratorMatrix.from_offdiagonal(off, states))
    u = unemployment_rate(res.shares, ("SE", "FT", "PE"), "U")
    row = "  ".join(f"{x:6.3f}" for x in res.shares.shares)
    print(f"{year}  {row}   {u:6.3f}  {res.half_life:6.2f} y")
