"""
First-order convergence in time
===============================

Halve the time step four times on a fixed spatial mesh and estimate the
order from consecutive errors.
"""

from isp.experiments import build_case, convergence_study

for cid in (1, 2):
    rows = convergence_study(build_case(cid), [1 / 25, 1 / 50, 1 / 100, 1 / 200])
    print(f"case {cid}")
    print("   tau       E_max_u     E_max_h     EOC_u  EOC_h")
    for r in rows:
        eu = "" if r.eoc_u is None else f"{r.eoc_u:.3f}"
        eh = "" if r.eoc_h is None else f"{r.eoc_h:.3f}"
        print(f"  {r.tau:.5f}  {r.E_max_u:.3e}  {r.E_max_h:.3e}  {eu:>5}  {eh:>5}")
