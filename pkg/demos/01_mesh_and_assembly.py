"""
Meshes and P1 matrices
======================

Build the two meshes used by the experiments and check a few facts about
the matrices assembled on them.
"""

import numpy as np

from isp import fem
from isp.mesh import build_interval_mesh, build_unit_square_mesh

# The interval mesh has n + 1 nodes and two boundary points with normals -1 and +1.
line = build_interval_mesh(200)
print("interval:", line.node_count, "nodes,", line.cell_count, "cells")
print("boundary normals:", line.normals.ravel())

# The square is split into 2 nx ny right triangles.
square = build_unit_square_mesh(40, 40)
print("square:", square.node_count, "nodes,", square.cell_count, "triangles")
print("total area:", square.cell_measures().sum())
print("perimeter:", square.facet_measures().sum())

# Summing every mass-matrix entry gives the area of the domain.
M = fem.assemble_mass(square)
print("1^T M 1 =", np.ones(square.node_count) @ (M @ np.ones(square.node_count)))

# Constants lie in the kernel of the stiffness matrix.
K = fem.assemble_weighted_stiffness(square, lambda t, x: t + 1.0, t=0.5)
print("max |K 1| =", np.abs(K @ np.ones(square.node_count)).max())

# Solve a mass system with the preconditioned CG solver and compare to the
# L2 projection of sin(pi x) sin(pi y).
field = lambda t, x: np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])
b = fem.assemble_domain_load(square, field, 0.0)
u, (iters, resid) = fem.solve_spd(M, b, return_info=True)
err = fem.l2_norm(square, u - fem.interpolate(square, field), M)
print(f"CG: {iters} iterations, residual {resid:.1e}, distance to interpolant {err:.2e}")
