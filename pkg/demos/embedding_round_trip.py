# Recovering a generator from a one-period transition matrix.
#
# A quarterly survey only shows where people are at two dates. If the
# underlying process runs in continuous time with rates Q, the observed
# matrix is P = exp(Q), and the estimation problem is to go back from P to Q.

import numpy as np

from labourflows import GeneratorMatrix, StochasticMatrix, estimate_generator, matrix_exp, matrix_log_series

np.set_printoptions(precision=4, suppress=True)

# A two-state world: employed (E) and unemployed (U).
Q = GeneratorMatrix([[-0.05, 0.05], [0.60, -0.60]], ("E", "U"))
P = matrix_exp(Q.entries)
print("one-period transition matrix\n", P)

# The log series gives Q back to machine precision.
res = matrix_log_series(P)
print("recovered generator\n", res.Qtilde)
print("terms used:", res.terms_used, " max error:", np.abs(res.Qtilde - Q.entries).max())

# Sampled matrices are noisy. A move nobody was seen making directly, but
# which is reachable in two steps, gets a negative rate from the log;
# regularisation removes it.
P_obs = np.array([[0.90, 0.10, 0.00], [0.20, 0.70, 0.10], [0.00, 0.05, 0.95]])
print("\nraw log\n", matrix_log_series(P_obs).Qtilde)
for method in ("truncate_absorb", "redistribute"):
    est = estimate_generator(StochasticMatrix(P_obs), method)
    print(f"\n{method}: removed {est.negative_mass_removed:.2e} of negative mass")
    print(est.Q.entries)
