"""P1 finite elements: quadrature, assembly and a Jacobi-preconditioned CG.

Fields are plain callables. Domain fields are called as ``f(t, x)`` with
``x`` of shape ``(npts, dim)``; boundary fields as ``g(t, x, normal)`` with
``normal`` of the same shape. Either may return a scalar, which is broadcast.

Quadrature rules:

* 1D cells: 2-point Gauss-Legendre (exact to degree 3).
* triangles: edge-midpoint rule (exact to degree 2).
* 2D boundary edges: 2-point Gauss-Legendre; 1D boundary: point evaluation.
"""

import weakref
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import (
    CoefficientBoundError,
    ConvergenceError,
    InvalidArgumentError,
    InvalidMatrixError,
)

__all__ = [
    "QuadratureRule",
    "CELL_RULES",
    "assemble_mass",
    "assemble_weighted_stiffness",
    "assemble_domain_load",
    "assemble_boundary_load",
    "load_from_quadrature_values",
    "interpolate",
    "values_at_quadrature",
    "quadrature_points",
    "check_symmetric",
    "solve_spd",
    "pcg",
    "l2_norm",
    "h1_seminorm",
]


@dataclass(frozen=True)
class QuadratureRule:
    """Reference-element rule.

    ``points`` are barycentric coordinates (one row per point); ``weights``
    sum to the reference measure, which is taken as 1 so that physical
    weights are ``weights * |cell|``.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int


_g = 0.5 / np.sqrt(3.0)
GAUSS2 = QuadratureRule(
    points=np.array([[0.5 + _g, 0.5 - _g], [0.5 - _g, 0.5 + _g]]),
    weights=np.array([0.5, 0.5]),
    degree=3,
)
EDGE_MIDPOINT = QuadratureRule(
    points=np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
    weights=np.full(3, 1.0 / 3.0),
    degree=2,
)
CELL_RULES = {1: GAUSS2, 2: EDGE_MIDPOINT}


class _Geometry:
    """Per-mesh quantities reused by every assembly call."""

    def __init__(self, mesh):
        self.mesh = mesh
        dim = mesh.dim
        rule = CELL_RULES[dim]
        self.rule = rule
        self.basis = rule.points  # (Q, dim+1), P1 basis = barycentrics
        vert = mesh.nodes[mesh.cells]  # (C, dim+1, dim)
        self.qpoints = np.einsum("qk,ckd->cqd", rule.points, vert)
        meas = mesh.cell_measures()
        self.qweights = meas[:, None] * rule.weights[None, :]

        if dim == 1:
            h = meas
            g = np.empty((mesh.cell_count, 2, 1))
            g[:, 0, 0] = -1.0 / h
            g[:, 1, 0] = 1.0 / h
        else:
            e1 = vert[:, 1] - vert[:, 0]
            e2 = vert[:, 2] - vert[:, 0]
            det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
            g = np.empty((mesh.cell_count, 3, 2))
            # rows of inverse Jacobian transpose
            g[:, 1, 0] = e2[:, 1] / det
            g[:, 1, 1] = -e2[:, 0] / det
            g[:, 2, 0] = -e1[:, 1] / det
            g[:, 2, 1] = e1[:, 0] / det
            g[:, 0] = -g[:, 1] - g[:, 2]
        self.grads = g

        nloc = dim + 1
        self.rows = np.repeat(mesh.cells, nloc, axis=1).ravel()
        self.cols = np.tile(mesh.cells, (1, nloc)).ravel()

        if dim == 1:
            self.bpoints = mesh.nodes[mesh.facets[:, 0]][:, None, :]
            self.bnormals = mesh.normals[:, None, :]
            self.bweights = np.ones((mesh.facets.shape[0], 1))
            self.bbasis = np.ones((1, 1))
        else:
            s = np.array([0.5 - _g, 0.5 + _g])
            self.bbasis = np.column_stack([1.0 - s, s])  # (2 points, 2 nodes)
            ends = mesh.nodes[mesh.facets]  # (B, 2, 2)
            self.bpoints = np.einsum("qk,bkd->bqd", self.bbasis, ends)
            self.bnormals = np.repeat(mesh.normals[:, None, :], 2, axis=1)
            self.bweights = mesh.facet_measures()[:, None] * np.array([0.5, 0.5])[None, :]


_CACHE = weakref.WeakKeyDictionary()


def _geometry(mesh):
    geo = _CACHE.get(mesh)
    if geo is None:
        geo = _Geometry(mesh)
        _CACHE[mesh] = geo
    return geo


def _evaluate(field, t, points, normals=None):
    shape = points.shape[:-1]
    flat = points.reshape(-1, points.shape[-1])
    if normals is None:
        vals = field(t, flat)
    else:
        vals = field(t, flat, normals.reshape(-1, normals.shape[-1]))
    vals = np.broadcast_to(np.asarray(vals, dtype=float), (flat.shape[0],))
    return vals.reshape(shape)


def quadrature_points(mesh):
    """Physical cell quadrature points, shape ``(C, Q, dim)``."""
    return _geometry(mesh).qpoints


def _from_local(geo, local):
    n = geo.mesh.node_count
    A = sp.coo_matrix((local.ravel(), (geo.rows, geo.cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def assemble_mass(mesh):
    """Consistent P1 mass matrix (CSR)."""
    geo = _geometry(mesh)
    phi = geo.basis
    local = np.einsum("cq,qa,qb->cab", geo.qweights, phi, phi)
    return _from_local(geo, local)


def assemble_weighted_stiffness(mesh, coeff, t):
    """Matrix of ``(coeff(t) grad u, grad v)``.

    Raises
    ------
    CoefficientBoundError
        If ``coeff`` is not strictly positive at some quadrature point.
    """
    geo = _geometry(mesh)
    c = _evaluate(coeff, t, geo.qpoints)
    if not np.all(c > 0.0):
        bad = np.argwhere(~(c > 0.0))[0]
        raise CoefficientBoundError(
            f"coefficient value {c[tuple(bad)]!r} <= 0 at t={t}, cell {bad[0]}"
        )
    cbar = np.sum(geo.qweights * c, axis=1)
    local = cbar[:, None, None] * np.einsum("cad,cbd->cab", geo.grads, geo.grads)
    return _from_local(geo, local)


def load_from_quadrature_values(mesh, values):
    """Load vector ``b_j = sum_q w_q values_q phi_j(x_q)`` for values at cell points."""
    geo = _geometry(mesh)
    local = np.einsum("cq,cq,qa->ca", geo.qweights, values, geo.basis)
    return np.bincount(mesh.cells.ravel(), weights=local.ravel(), minlength=mesh.node_count)


def assemble_domain_load(mesh, density, t):
    """Vector of ``(density(t), phi_j)`` over the domain."""
    geo = _geometry(mesh)
    return load_from_quadrature_values(mesh, _evaluate(density, t, geo.qpoints))


def assemble_boundary_load(mesh, density, t):
    """Vector of ``(density(t), phi_j)`` over the boundary.

    ``density`` is called as ``density(t, x, normal)``.
    """
    geo = _geometry(mesh)
    vals = _evaluate(density, t, geo.bpoints, geo.bnormals)
    local = np.einsum("bq,bq,qa->ba", geo.bweights, vals, geo.bbasis)
    return np.bincount(mesh.facets.ravel(), weights=local.ravel(), minlength=mesh.node_count)


def interpolate(mesh, field, t=0.0):
    """Nodal values of the P1 interpolant of ``field(t, .)``."""
    return _evaluate(field, t, mesh.nodes)


def values_at_quadrature(mesh, v):
    """Values of the P1 function with nodal vector ``v`` at cell quadrature points."""
    geo = _geometry(mesh)
    return np.einsum("ca,qa->cq", np.asarray(v)[mesh.cells], geo.basis)


def check_symmetric(A, rtol=1e-14):
    """Raise :class:`InvalidMatrixError` unless ``A`` is numerically symmetric."""
    A = sp.csr_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise InvalidMatrixError(f"matrix is not square: {A.shape}")
    scale = abs(A).max() if A.nnz else 0.0
    diff = A - A.T
    err = abs(diff).max() if diff.nnz else 0.0
    if err > rtol * scale:
        raise InvalidMatrixError(f"matrix is not symmetric: max|A - A^T| = {err:.3e}")


def pcg(A, b, rel_tol=1e-12, max_iter=None, x0=None):
    """Jacobi-preconditioned conjugate gradients.

    Returns ``(x, iterations, relative_residual)``; the residual is the true
    one, recomputed from ``x`` on exit.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if max_iter is None:
        max_iter = 10 * n
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    diag = A.diagonal()
    if np.any(diag <= 0.0):
        raise InvalidMatrixError("non-positive diagonal entry; matrix is not SPD")
    inv_diag = 1.0 / diag
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    target = rel_tol * bnorm
    it = 0
    # recursive residual drifts from the true one; restart from the true
    # residual until both agree with the target
    while True:
        z = inv_diag * r
        d = z.copy()
        rz = r @ z
        while np.linalg.norm(r) > target and it < max_iter:
            Ad = A @ d
            alpha = rz / (d @ Ad)
            x += alpha * d
            r -= alpha * Ad
            z = inv_diag * r
            rz_new = r @ z
            d = z + (rz_new / rz) * d
            rz = rz_new
            it += 1
        r = b - A @ x
        res = np.linalg.norm(r)
        if res <= target or it >= max_iter:
            break
    return x, it, res / bnorm


def solve_spd(A, b, rel_tol=1e-12, max_iter=None, x0=None, return_info=False):
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    Parameters
    ----------
    A : sparse matrix
    b : array_like
    rel_tol : float
        Target for ``||A x - b|| / ||b||``.
    max_iter : int, optional
        Defaults to ``10 * n``.
    x0 : array_like, optional
        Starting guess.
    return_info : bool
        Also return ``(iterations, relative_residual)``.

    Raises
    ------
    InvalidMatrixError
        For an asymmetric matrix or a shape mismatch.
    ConvergenceError
        When ``max_iter`` is reached before ``rel_tol``.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    if A.shape != (b.shape[0], b.shape[0]):
        raise InvalidMatrixError(f"shape mismatch: A {A.shape}, b {b.shape}")
    check_symmetric(A, rtol=1e-13)
    x, it, res = pcg(A, b, rel_tol=rel_tol, max_iter=max_iter, x0=x0)
    if res > rel_tol:
        raise ConvergenceError(
            f"CG stopped after {it} iterations with relative residual {res:.3e}",
            residual=res,
            iterations=it,
        )
    if return_info:
        return x, (it, res)
    return x


def l2_norm(mesh, v, mass=None):
    """L2(Omega) norm of the P1 function with nodal vector ``v``."""
    v = np.asarray(v, dtype=float)
    if v.shape != (mesh.node_count,):
        raise InvalidArgumentError(
            f"vector has shape {v.shape}, expected ({mesh.node_count},)"
        )
    M = assemble_mass(mesh) if mass is None else mass
    return float(np.sqrt(max(v @ (M @ v), 0.0)))


def h1_seminorm(mesh, v, stiffness=None):
    """Norm of the gradient of the P1 function ``v``."""
    v = np.asarray(v, dtype=float)
    K = assemble_weighted_stiffness(mesh, _one, 0.0) if stiffness is None else stiffness
    return float(np.sqrt(max(v @ (K @ v), 0.0)))


def _one(t, x):
    return 1.0
