import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from isp import fem
from isp.errors import CoefficientBoundError, ConvergenceError, InvalidArgumentError, InvalidMatrixError
from isp.mesh import build_interval_mesh, build_unit_square_mesh


def one(t, x):
    return 1.0


def one_b(t, x, n):
    return 1.0


# --- mass ---------------------------------------------------------------

def test_mass_single_element():
    M = fem.assemble_mass(build_interval_mesh(1)).toarray()
    assert np.allclose(M, [[1 / 3, 1 / 6], [1 / 6, 1 / 3]], atol=1e-15)


def test_mass_two_elements_middle_entry():
    M = fem.assemble_mass(build_interval_mesh(2)).toarray()
    assert M[1, 1] == pytest.approx(2 * 0.5 / 3, abs=1e-15)


def test_mass_triangle_matches_analytic_element_matrix():
    # reference P1 triangle mass: |T|/12 * [[2,1,1],[1,2,1],[1,1,2]]
    mesh = build_unit_square_mesh(1, 1)
    M = fem.assemble_mass(mesh).toarray()
    Me = 0.5 / 12 * (np.ones((3, 3)) + np.eye(3))
    expected = np.zeros((4, 4))
    for c in mesh.cells:
        expected[np.ix_(c, c)] += Me
    assert np.allclose(M, expected, atol=1e-15)


@pytest.mark.parametrize("mesh", [build_interval_mesh(7), build_unit_square_mesh(5, 3)])
def test_mass_total_and_spd(mesh):
    M = fem.assemble_mass(mesh)
    ones = np.ones(mesh.node_count)
    assert ones @ (M @ ones) == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.eigvalsh(M.toarray()).min() > 0
    fem.check_symmetric(M)
    assert M.has_sorted_indices
    assert np.all(np.diff(M.indptr) >= 0)


# --- stiffness ------------------------------------------------------------

def test_stiffness_single_element():
    K = fem.assemble_weighted_stiffness(build_interval_mesh(1), one, 0.0).toarray()
    assert np.allclose(K, [[1, -1], [-1, 1]], atol=1e-15)


def test_stiffness_time_dependent_coefficient():
    K = fem.assemble_weighted_stiffness(build_interval_mesh(1), lambda t, x: t + 1, 1.0)
    assert np.allclose(K.toarray(), [[2, -2], [-2, 2]], atol=1e-15)


def test_stiffness_unit_square_single_cell_pair():
    # Laplacian on two right triangles: classic 5-point-like element sums
    K = fem.assemble_weighted_stiffness(build_unit_square_mesh(1, 1), one, 0.0).toarray()
    expected = np.array([
        [1.0, -0.5, -0.5, 0.0],
        [-0.5, 1.0, 0.0, -0.5],
        [-0.5, 0.0, 1.0, -0.5],
        [0.0, -0.5, -0.5, 1.0],
    ])
    assert np.allclose(K, expected, atol=1e-15)


def test_stiffness_rejects_nonpositive_coefficient():
    with pytest.raises(CoefficientBoundError):
        fem.assemble_weighted_stiffness(build_interval_mesh(3), lambda t, x: x[:, 0] - 0.5, 0.0)


@settings(max_examples=25, deadline=None)
@given(
    st.integers(1, 12), st.integers(1, 12),
    st.floats(0.1, 5.0), st.floats(-2.0, 2.0), st.floats(0.0, 1.0),
)
def test_stiffness_kernel_and_symmetry(nx, ny, c0, c1, t):
    mesh = build_unit_square_mesh(nx, ny)
    coeff = lambda t_, x: c0 + 0.05 * abs(c1) * np.sin(3 * x[:, 0] + x[:, 1] + t_)
    K = fem.assemble_weighted_stiffness(mesh, coeff, t)
    assert np.abs(K @ np.ones(mesh.node_count)).max() <= 1e-13 * max(1.0, abs(K).max())
    fem.check_symmetric(K)
    evals = np.linalg.eigvalsh(K.toarray())
    assert evals.min() > -1e-10
    # only constants in the kernel
    assert np.sum(evals < 1e-10 * evals.max()) == 1


# --- loads ------------------------------------------------------------------

@pytest.mark.parametrize("mesh", [build_interval_mesh(9), build_unit_square_mesh(4, 6)])
def test_unit_density_integrates_to_area(mesh):
    assert fem.assemble_domain_load(mesh, one, 0.0).sum() == pytest.approx(1.0, abs=1e-14)


def test_boundary_unit_density():
    assert fem.assemble_boundary_load(build_unit_square_mesh(3, 5), one_b, 0.0).sum() == pytest.approx(4.0, abs=1e-14)
    assert fem.assemble_boundary_load(build_interval_mesh(5), one_b, 0.0).sum() == 2.0


def test_boundary_load_supported_on_boundary():
    mesh = build_unit_square_mesh(4, 4)
    b = fem.assemble_boundary_load(mesh, lambda t, x, n: 1 + x[:, 0] * x[:, 1], 0.0)
    interior = np.setdiff1d(np.arange(mesh.node_count), mesh.boundary_nodes())
    assert np.all(b[interior] == 0)


def test_profile_integral_converges():
    # integral of -(pi^2/2) sin(pi x) over (0,1) is -pi
    p = lambda t, x: -(math.pi**2 / 2) * np.sin(math.pi * x[:, 0])
    errs = [abs(fem.assemble_domain_load(build_interval_mesh(n), p, 0.0).sum() + math.pi)
            for n in (10, 20, 40)]
    assert errs[2] < errs[1] < errs[0]
    assert errs[0] / errs[1] == pytest.approx(errs[1] / errs[2], rel=0.05)


def test_lagged_nonlinearity_integral(mesh1d):
    u = fem.interpolate(mesh1d, lambda t, x: np.sin(math.pi * x[:, 0]))
    b = fem.load_from_quadrature_values(mesh1d, -fem.values_at_quadrature(mesh1d, u))
    # P1 interpolation error of sin: O(h^2) with h = 1/200
    assert b.sum() == pytest.approx(-2 / math.pi, abs=5e-5)


def test_boundary_flux_1d():
    # g = kappa u_x n with u = exp(-t) sin(pi x), kappa = t + 1: -pi at both ends, t = 0
    g = lambda t, x, n: (t + 1) * math.exp(-t) * math.pi * np.cos(math.pi * x[:, 0]) * n[:, 0]
    b = fem.assemble_boundary_load(build_interval_mesh(10), g, 0.0)
    assert b.sum() == pytest.approx(-2 * math.pi, abs=1e-13)


@pytest.mark.parametrize("mesh", [build_interval_mesh(13), build_unit_square_mesh(5, 4)])
def test_quadrature_consistent_with_mass(mesh, rng):
    w = rng.standard_normal(mesh.node_count)
    b = fem.load_from_quadrature_values(mesh, fem.values_at_quadrature(mesh, w))
    M = fem.assemble_mass(mesh)
    assert b @ w == pytest.approx(w @ (M @ w), rel=1e-12)
    assert np.allclose(b, M @ w, atol=1e-14)


def test_boundary_rule_exact_for_cubics_on_edges():
    mesh = build_unit_square_mesh(1, 1)
    # integral of x^3 along the bottom edge is 1/4; on the top edge too
    b = fem.assemble_boundary_load(mesh, lambda t, x, n: x[:, 0] ** 3 * (n[:, 0] == 0), 0.0)
    assert b.sum() == pytest.approx(0.5, abs=1e-15)


# --- solver -----------------------------------------------------------------

def test_solve_mass_system():
    M = fem.assemble_mass(build_interval_mesh(1))
    assert np.allclose(fem.solve_spd(M, [0.5, 0.5]), [1.0, 1.0], atol=1e-12)


def test_solve_zero_rhs():
    M = fem.assemble_mass(build_interval_mesh(4))
    assert np.array_equal(fem.solve_spd(M, np.zeros(5)), np.zeros(5))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_solve_matches_dense_elimination(seed):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((5, 5))
    A = B @ B.T + 5 * np.eye(5)
    b = rng.standard_normal(5)
    x = fem.solve_spd(sp.csr_matrix(A), b, rel_tol=1e-14)
    assert np.allclose(x, np.linalg.solve(A, b), rtol=0, atol=1e-10)


def test_solve_residual_bound_holds(mesh2d, rng):
    A = fem.assemble_mass(mesh2d) * 200 + fem.assemble_weighted_stiffness(mesh2d, one, 0.0) * 100
    b = rng.standard_normal(mesh2d.node_count)
    x, (it, res) = fem.solve_spd(A, b, rel_tol=1e-12, return_info=True)
    assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(b)
    assert res == pytest.approx(np.linalg.norm(A @ x - b) / np.linalg.norm(b))
    x2 = fem.solve_spd(A, b, rel_tol=1e-12)
    assert np.array_equal(x, x2)


def test_solve_rejects_asymmetric():
    A = sp.csr_matrix(np.array([[2.0, 1.0], [0.0, 2.0]]))
    with pytest.raises(InvalidMatrixError):
        fem.solve_spd(A, [1.0, 1.0])


def test_solve_iteration_cap(mesh2d):
    A = fem.assemble_mass(mesh2d) + fem.assemble_weighted_stiffness(mesh2d, one, 0.0)
    with pytest.raises(ConvergenceError) as info:
        fem.solve_spd(A, np.arange(mesh2d.node_count, dtype=float), max_iter=3)
    assert info.value.residual > 1e-12
    assert info.value.iterations == 3


# --- norms -------------------------------------------------------------------

def test_l2_norm_constant(mesh1d):
    assert fem.l2_norm(mesh1d, np.ones(mesh1d.node_count)) == pytest.approx(1.0, abs=1e-12)


def test_l2_norm_sine(mesh1d):
    v = fem.interpolate(mesh1d, lambda t, x: np.sin(math.pi * x[:, 0]))
    assert fem.l2_norm(mesh1d, v) == pytest.approx(math.sqrt(0.5), abs=1e-4)


def test_l2_norm_zero_and_shape(mesh1d):
    assert fem.l2_norm(mesh1d, np.zeros(mesh1d.node_count)) == 0.0
    with pytest.raises(InvalidArgumentError):
        fem.l2_norm(mesh1d, np.zeros(3))
