"""
Recovering the source amplitude
===============================

Run the time stepping scheme on the first manufactured case with exact
measurements and compare the recovered h(t) with exp(-t).
"""

from isp.experiments import build_case, compute_errors
from isp.rothe import inverse_solve

case = build_case(1)
mesh = case.build_mesh()
grid = case.grid()
print(f"{mesh.cell_count} elements, {grid.n} time steps")

result = inverse_solve(case.spec, mesh, grid, snapshot_steps=[50, 100])

for i in (0, 49, 99, 199):
    t = result.t[i]
    print(f"t={t:.3f}  h={result.h[i]:.6f}  exact={case.exact_h(t):.6f}")

report = compute_errors(case, result, grid)
print(f"E_max_h = {report.E_max_h:.3e}, E_max_u = {report.E_max_u:.3e}")

# Testing the scheme with phi = 1 shows the discrete state reproduces m'
# exactly, up to the CG tolerance.
print("max measurement residual:", result.measurement_residuals.max())
print("stored snapshots:", sorted(result.snapshots))
print("energy terms:", {k: round(v, 4) for k, v in result.energy.items()})
