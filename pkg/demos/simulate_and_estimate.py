# Simulating a survey panel and estimating the rates back.
#
# 50,000 people move between five states in continuous time and are observed
# once a quarter for seven years. Each pair of quarters gives an estimate of
# the quarterly generator, and their average should sit close to the truth.

import time

import numpy as np

from labourflows import (
    GeneratorMatrix,
    SimulationSpec,
    StateSpace,
    equilibrium,
    estimate_series,
    simulate_panel,
)

np.set_printoptions(precision=3, suppress=True)
states = StateSpace(("SE", "FT", "PE", "U", "IN"))

# annual rates; a quarter is a quarter of a year
annual = np.array([
    [0.000, 0.031, 0.056, 0.050, 0.084],
    [0.026, 0.000, 0.257, 0.419, 0.351],
    [0.020, 0.037, 0.000, 0.034, 0.046],
    [0.109, 0.659, 0.109, 0.000, 2.371],
    [0.025, 0.091, 0.031, 0.471, 0.000],
])
Q = GeneratorMatrix.from_offdiagonal(annual / 4, states)

t0 = time.perf_counter()
panel = simulate_panel(SimulationSpec(Q, 50_000, 28, equilibrium(Q).shares, seed=1))
estimates = estimate_series(panel)
print(f"simulated and estimated in {time.perf_counter() - t0:.2f} s")

mean_Q = np.mean([e.Q.entries for e in estimates], axis=0)
print("true quarterly generator\n", Q.entries)
print("mean estimate\n", mean_Q)
print("largest error:", np.abs(mean_Q - Q.entries).max())

eq = equilibrium(mean_Q)
occupancy = np.bincount(panel.states.ravel(), minlength=5) / panel.states.size
print("\nequilibrium of the estimate:", eq.shares.shares)
print("simulated occupancy:        ", occupancy)
print(f"half-life of deviations: {eq.half_life:.2f} quarters")
