# Which flow drives the unemployment share, and did a rate break?
#
# Part one builds a world where only the U -> IN rate cycles and asks the
# volatility decomposition to find it. Part two forecasts a seasonal rate
# from its history and compares the forecast with what happened after a
# level shift.

import numpy as np

from labourflows import (
    GeneratorMatrix,
    StateSpace,
    combine_forecasts,
    counterfactual_gap,
    decompose_volatility,
    equilibrium,
    propagate,
)

states = StateSpace(("SE", "FT", "PE", "U", "IN"))
base = np.array([
    [0.000, 0.031, 0.056, 0.050, 0.084],
    [0.026, 0.000, 0.257, 0.419, 0.351],
    [0.020, 0.037, 0.000, 0.034, 0.046],
    [0.109, 0.659, 0.109, 0.000, 2.371],
    [0.025, 0.091, 0.031, 0.471, 0.000],
])

Qs = []
for t in range(40):
    off = base.copy()
    off[3, 4] *= 1 + 0.3 * np.sin(2 * np.pi * t / 12)
    Qs.append(GeneratorMatrix.from_offdiagonal(off, states))
shares = [equilibrium(Qs[0]).shares]
for Q in Qs:
    shares.append(propagate(shares[-1], Q))

table = decompose_volatility(Qs, shares, "U")
print("contribution to the volatility of the U share")
for (a, b), beta in sorted(table.entries.items(), key=lambda kv: -abs(kv[1])):
    print(f"  {a:>2} -> {b:<2} {beta:7.3f}")

# a quarterly rate with trend and seasonality, shifted up by 0.04 after quarter 40
rng = np.random.default_rng(3)
t = np.arange(48)
rate = 0.30 + 0.001 * t + np.array([0.0, 0.02, -0.01, 0.01])[t % 4] + rng.normal(0, 0.005, 48)
rate[40:] += 0.04

fc = combine_forecasts(rate[:40], 8)
print("\nmodels:", ", ".join(f"{f} {o}" for f, o, _ in fc.models_used))
print("h  observed  forecast  95% band          outside")
for h, g in enumerate(counterfactual_gap(rate[40:], fc)):
    print(f"{h + 1}  {rate[40 + h]:.3f}     {fc.point[h]:.3f}     "
          f"[{fc.lower95[h]:.3f}, {fc.upper95[h]:.3f}]  {g.outside95}")
