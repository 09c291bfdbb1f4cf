"""Manufactured test cases, error metrics and convergence studies.

All four cases use ``eta = 0.5``, ``kappa = t + 1``, ``T = 1`` and a
separable exact solution ``u(t, x) = a(t) S(x)``, which gives the Neumann
datum ``g = kappa a(t) grad S . n`` and ``dG/dt = a'(t) grad S . n``.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import sympy

from . import fem, rothe
from .errors import InvalidArgumentError
from .mesh import build_interval_mesh, build_unit_square_mesh
from .problem import ProblemSpec, TimeGrid
from .regularization import fit_polynomial, generate_noisy, select_degree

__all__ = [
    "ManufacturedCase",
    "ErrorReport",
    "ConvergenceRow",
    "NoisyRun",
    "build_case",
    "compute_errors",
    "convergence_study",
    "run_noisy",
    "strong_residual",
    "boundary_flux_mismatch",
    "ETA",
    "kappa",
]

PI = math.pi
ETA = 0.5
EPSILONS = (0.001, 0.005, 0.01, 0.03, 0.05)


def eta(t, x):
    return ETA


def kappa(t, x):
    return t + 1.0


def _sin1(x):
    return np.sin(PI * x[:, 0])


def _grad_sin1(x):
    return (PI * np.cos(PI * x[:, 0]))[:, None]


def _sin2(x):
    return np.sin(PI * x[:, 0]) * np.sin(PI * x[:, 1])


def _grad_sin2(x):
    sx, sy = np.sin(PI * x[:, 0]), np.sin(PI * x[:, 1])
    cx, cy = np.cos(PI * x[:, 0]), np.cos(PI * x[:, 1])
    return np.column_stack([PI * cx * sy, PI * sx * cy])


@dataclass
class ManufacturedCase:
    """Closed-form test problem together with its default discretization."""

    id: int
    dim: int
    spec: ProblemSpec
    exact_u: Callable
    exact_h: Callable
    m: Callable
    m_prime: Callable
    p: Callable
    F: Callable
    f: Callable
    g: Callable
    dGdt: Callable
    u0: Callable
    mesh_size: tuple
    n_time_steps: int = 200
    parity: str = "any"
    preset_degree: int = 3
    # sympy expressions in t, x (, y) used only by the residual checks
    u_expr: object = field(default=None, repr=False)
    h_expr: object = field(default=None, repr=False)

    def build_mesh(self, size=None):
        size = self.mesh_size if size is None else size
        if self.dim == 1:
            return build_interval_mesh(*size)
        return build_unit_square_mesh(*size)

    def grid(self, n=None):
        return TimeGrid(self.spec.T, self.n_time_steps if n is None else n)


def _case_data(case_id):
    """Time factor, its derivative, amplitude, profile, F and forcing."""
    if case_id == 1:
        a = lambda t: math.exp(-t)
        da = lambda t: -math.exp(-t)
        h = lambda t: math.exp(-t)
        p = lambda t, x: -(PI**2 / 2.0) * _sin1(x)
        F = lambda u: -np.asarray(u)
        f = lambda t, x: PI**2 * (t + 1.0) * math.exp(-t) * _sin1(x)
        m = lambda t: (2.0 / PI) * math.exp(-t)
        dm = lambda t: -(2.0 / PI) * math.exp(-t)
        return dict(a=a, da=da, h=h, p=p, F=F, L=1.0, f=f, m=m, dm=dm, dim=1,
                    S=_sin1, gradS=_grad_sin1, parity="any", degree=3)
    if case_id == 2:
        a = lambda t: math.cos(2 * PI * t)
        da = lambda t: -2 * PI * math.sin(2 * PI * t)
        h = lambda t: math.sin(2 * PI * t)
        p = lambda t, x: -(2 * PI + PI**3) * _sin1(x)
        F = lambda u: PI**2 * np.asarray(u)
        f = lambda t, x: PI**2 * t * _sin1(x) * math.cos(2 * PI * t)
        m = lambda t: (2.0 / PI) * math.cos(2 * PI * t)
        dm = lambda t: -4.0 * math.sin(2 * PI * t)
        return dict(a=a, da=da, h=h, p=p, F=F, L=PI**2, f=f, m=m, dm=dm, dim=1,
                    S=_sin1, gradS=_grad_sin1, parity="even", degree=6)
    if case_id == 3:
        a = lambda t: math.exp(-t)
        da = lambda t: -math.exp(-t)
        h = lambda t: math.exp(-t)
        p = lambda t, x: -PI**2 * _sin2(x)
        F = lambda u: -np.asarray(u)
        # -div(kappa grad u) contributes 2 pi^2 (t+1) u in two dimensions
        f = lambda t, x: 2 * PI**2 * (t + 1.0) * math.exp(-t) * _sin2(x)
        m = lambda t: (4.0 / PI**2) * math.exp(-t)
        dm = lambda t: -(4.0 / PI**2) * math.exp(-t)
        return dict(a=a, da=da, h=h, p=p, F=F, L=1.0, f=f, m=m, dm=dm, dim=2,
                    S=_sin2, gradS=_grad_sin2, parity="any", degree=3)
    if case_id == 4:
        a = lambda t: math.cos(2 * PI * t)
        da = lambda t: -2 * PI * math.sin(2 * PI * t)
        h = lambda t: math.sin(2 * PI * t)
        p = lambda t, x: -2 * (PI + PI**3) * _sin2(x)
        F = lambda u: 2 * PI**2 * np.asarray(u)
        f = lambda t, x: 2 * PI**2 * t * _sin2(x) * math.cos(2 * PI * t)
        m = lambda t: (4.0 / PI**2) * math.cos(2 * PI * t)
        dm = lambda t: -(8.0 / PI) * math.sin(2 * PI * t)
        return dict(a=a, da=da, h=h, p=p, F=F, L=2 * PI**2, f=f, m=m, dm=dm, dim=2,
                    S=_sin2, gradS=_grad_sin2, parity="even", degree=6)
    raise InvalidArgumentError(f"unknown experiment id {case_id!r}; expected 1..4")


def _sym_exprs(case_id):
    t, x, y = sympy.symbols("t x y")
    if case_id in (2, 4):
        time, amp = sympy.cos(2 * sympy.pi * t), sympy.sin(2 * sympy.pi * t)
    else:
        time, amp = sympy.exp(-t), sympy.exp(-t)
    space = sympy.sin(sympy.pi * x)
    if case_id >= 3:
        space = space * sympy.sin(sympy.pi * y)
    return time * space, amp


def build_case(case_id):
    """Return the :class:`ManufacturedCase` for experiment ``case_id`` (1..4)."""
    d = _case_data(case_id)
    a, da, S, gradS = d["a"], d["da"], d["S"], d["gradS"]

    def exact_u(t, x):
        return a(t) * S(x)

    def g(t, x, normal):
        return (t + 1.0) * a(t) * np.sum(gradS(x) * normal, axis=1)

    def dGdt(t, x, normal):
        return da(t) * np.sum(gradS(x) * normal, axis=1)

    def u0(t, x):
        return exact_u(0.0, x)

    spec = ProblemSpec(
        eta=eta, kappa=kappa, F=d["F"], p=d["p"], g=g, dGdt=dGdt, u0=u0,
        m=d["m"], m_prime=d["dm"], T=1.0, f=d["f"], lipschitz_F=d["L"],
        exact_u=exact_u, exact_h=d["h"],
    )
    u_expr, h_expr = _sym_exprs(case_id)
    return ManufacturedCase(
        id=case_id, dim=d["dim"], spec=spec, exact_u=exact_u, exact_h=d["h"],
        m=d["m"], m_prime=d["dm"], p=d["p"], F=d["F"], f=d["f"], g=g, dGdt=dGdt,
        u0=u0, mesh_size=(200,) if d["dim"] == 1 else (40, 40),
        parity=d["parity"], preset_degree=d["degree"], u_expr=u_expr, h_expr=h_expr,
    )


def strong_residual(case, t, X):
    """Pointwise residual of the strong form at ``(t, X)`` for the exact pair.

    Derivatives of the exact solution come from symbolic differentiation;
    ``p``, ``F``, ``f`` and ``h`` are the case's closed-form callables.
    ``X`` has shape ``(npts, dim)``.
    """
    lhs = _symbolic_lhs(case)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    args = [X[:, k] for k in range(case.dim)]
    left = np.broadcast_to(lhs(t, *args), (X.shape[0],))
    u = case.exact_u(t, X)
    right = case.F(u) + case.p(t, X) * case.exact_h(t) + case.f(t, X)
    return left - right


_LHS_CACHE = {}


def _symbolic_lhs(case):
    key = case.id
    if key not in _LHS_CACHE:
        t, x, y = sympy.symbols("t x y")
        coords = [x] if case.dim == 1 else [x, y]
        u = case.u_expr
        e, k = sympy.Rational(1, 2), t + 1
        ut = sympy.diff(u, t)
        expr = ut
        for c in coords:
            expr -= sympy.diff(e * sympy.diff(ut, c), c)
            expr -= sympy.diff(k * sympy.diff(u, c), c)
        _LHS_CACHE[key] = sympy.lambdify([t, *coords], expr, "numpy")
    return _LHS_CACHE[key]


def boundary_flux_mismatch(case, t, X, normals):
    """``g - kappa grad u . n`` with the gradient taken symbolically."""
    tt, x, y = sympy.symbols("t x y")
    coords = [x] if case.dim == 1 else [x, y]
    grads = [sympy.lambdify([tt, *coords], sympy.diff(case.u_expr, c), "numpy") for c in coords]
    X = np.atleast_2d(np.asarray(X, dtype=float))
    args = [X[:, k] for k in range(case.dim)]
    flux = sum(np.broadcast_to(gr(t, *args), (X.shape[0],)) * normals[:, k]
               for k, gr in enumerate(grads))
    return case.g(t, X, normals) - (t + 1.0) * flux


@dataclass
class ErrorReport:
    E_max_u: float
    E_max_h: float
    u_errors: np.ndarray
    h_errors: np.ndarray


def compute_errors(case, result, grid, mesh=None):
    """Maximum-in-time errors of an inverse result or a direct trajectory.

    ``result`` is either an :class:`~isp.rothe.InverseResult` or an array of
    shape ``(n + 1, node_count)`` (then ``mesh`` is required and the h-error
    is reported as ``nan``).
    """
    if case.exact_u is None or case.exact_h is None:
        raise InvalidArgumentError("case has no exact references")
    times = grid.nodes[1:]
    if isinstance(result, np.ndarray):
        if mesh is None:
            raise InvalidArgumentError("mesh is required for a trajectory")
        M = fem.assemble_mass(mesh)
        u_err = np.array([
            fem.l2_norm(mesh, fem.interpolate(mesh, case.exact_u, t) - result[i + 1], M)
            for i, t in enumerate(times)
        ])
        h_err = np.full(grid.n, np.nan)
        return ErrorReport(float(u_err.max()), float("nan"), u_err, h_err)
    if result.u_errors is None:
        raise InvalidArgumentError("result carries no per-step u errors")
    h_exact = np.array([case.exact_h(t) for t in times])
    h_err = np.abs(h_exact - result.h)
    return ErrorReport(float(result.u_errors.max()), float(h_err.max()),
                       np.asarray(result.u_errors), h_err)


@dataclass
class ConvergenceRow:
    tau: float
    E_max_u: float
    E_max_h: float
    eoc_u: Optional[float] = None
    eoc_h: Optional[float] = None


def eoc(e_coarse, e_fine, tau_coarse, tau_fine, floor=1e-12):
    """Experimental order; ``nan`` when either error sits at the floor."""
    if not (e_coarse > floor and e_fine > floor):
        return float("nan")
    return math.log(e_coarse / e_fine) / math.log(tau_coarse / tau_fine)


def convergence_study(case, tau_list, mesh=None, cg_rel_tol=1e-12):
    """Noise-free runs for decreasing ``tau`` on a fixed mesh."""
    tau_list = [float(t) for t in tau_list]
    if len(tau_list) < 2:
        raise InvalidArgumentError("need at least two time steps")
    if any(b >= a for a, b in zip(tau_list, tau_list[1:])):
        raise InvalidArgumentError(f"tau list must be strictly decreasing: {tau_list}")
    mesh = case.build_mesh() if mesh is None else mesh
    rows = []
    for tau in tau_list:
        grid = TimeGrid.from_tau(case.spec.T, tau)
        res = rothe.inverse_solve(case.spec, mesh, grid, cg_rel_tol=cg_rel_tol)
        rep = compute_errors(case, res, grid)
        row = ConvergenceRow(tau, rep.E_max_u, rep.E_max_h)
        if rows:
            prev = rows[-1]
            row.eoc_u = eoc(prev.E_max_u, row.E_max_u, prev.tau, tau)
            row.eoc_h = eoc(prev.E_max_h, row.E_max_h, prev.tau, tau)
        rows.append(row)
    return rows


@dataclass
class NoisyRun:
    case_id: int
    epsilon: float
    seed: int
    degree: Optional[int]
    series: object
    fit: object
    result: rothe.InverseResult
    errors: ErrorReport


def run_noisy(case, epsilon, seed=None, degree="auto", parity=None, mesh=None, n=None,
              n_samples=100, threshold_percent=5.0, max_degree=10, cg_rel_tol=1e-12,
              omega_min=1e-8):
    """Reconstruct from noisy data regularized by a polynomial fit.

    ``seed`` defaults to ``case.id - 1``. With ``epsilon == 0`` the analytic
    ``m'`` is used and no fit is made.
    """
    seed = case.id - 1 if seed is None else seed
    parity = case.parity if parity is None else parity
    mesh = case.build_mesh() if mesh is None else mesh
    grid = case.grid(n)
    series = fit = None
    deg = None
    if epsilon == 0:
        m_prime = None
    else:
        series = generate_noisy(case.m, case.spec.T, n_samples, epsilon, seed)
        deg = (select_degree(series, parity, max_degree, threshold_percent)
               if degree == "auto" else int(degree))
        fit = fit_polynomial(series, deg, parity)
        m_prime = fit.derivative(grid.nodes[1:])
    res = rothe.inverse_solve(case.spec, mesh, grid, m_prime, cg_rel_tol=cg_rel_tol,
                              omega_min=omega_min)
    return NoisyRun(case.id, epsilon, seed, deg, series, fit, res,
                    compute_errors(case, res, grid))
