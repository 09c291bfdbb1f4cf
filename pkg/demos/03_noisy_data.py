"""
Noisy measurements and polynomial regularization
================================================

Perturb m(t), choose a fit degree from the relative improvement of the
residual, and feed the derivative of the fit to the solver.
"""

import numpy as np

from isp.experiments import build_case, run_noisy
from isp.regularization import degree_table, generate_noisy, select_degree

case = build_case(1)
series = generate_noisy(case.m, 1.0, n_samples=100, epsilon=0.01, seed=0)
print("largest relative perturbation:",
      np.abs(series.values / series.exact - 1).max())

print("degree  E(d)        r_im")
for d, e, rim in degree_table(series, range(1, 7)):
    print(f"{d:6d}  {e:.4e}  {'' if rim is None else f'{rim:6.2f}%'}")

print("selected degree:", select_degree(series))

# The second case is symmetric about t = 1/2, so only even powers of
# s = 2t - 1 are used.
osc = build_case(2)
even = generate_noisy(osc.m, 1.0, 100, 0.03, 1)
print("even-degree choice for case 2:", select_degree(even, parity="even"))

for eps in (0.001, 0.01, 0.05):
    run = run_noisy(case, eps, degree=3)
    print(f"eps={eps:<6} E_max_h={run.errors.E_max_h:.3e}  E_max_u={run.errors.E_max_u:.3e}")
