"""
The unit square
===============

The same solver on a 40 x 40 triangulation, for the decaying and the
oscillating source.
"""

import time

from isp.experiments import build_case, compute_errors
from isp.rothe import inverse_solve

for cid in (3, 4):
    case = build_case(cid)
    mesh, grid = case.build_mesh(), case.grid()
    start = time.perf_counter()
    res = inverse_solve(case.spec, mesh, grid)
    rep = compute_errors(case, res, grid)
    print(f"case {cid}: E_max_h={rep.E_max_h:.3e} E_max_u={rep.E_max_u:.3e} "
          f"mean CG iterations {res.cg_iterations.mean():.1f} "
          f"({time.perf_counter() - start:.1f}s)")
