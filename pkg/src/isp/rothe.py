"""Backward-Euler time stepping for the inverse and the direct problem.

At every step the unknown amplitude ``h_i`` is obtained explicitly from the
previous state by integrating the equation over the domain, after which one
SPD system

    (M/tau + K_eta/tau + K_kappa) u_i = b_i

is solved for the new state. Every integral in the formula for ``h_i`` is
taken as the entry sum of the load vector that also enters ``b_i``, so the
scheme reproduces ``1^T M (u_i - u_{i-1}) / tau = m'(t_i)`` up to the linear
solver tolerance.
"""

from dataclasses import dataclass, field

import numpy as np

from . import fem
from .errors import ConvergenceError, DegenerateProfileError

__all__ = [
    "InverseResult",
    "StepLoads",
    "step_loads",
    "system_matrix",
    "recover_h_step",
    "inverse_solve",
    "direct_solve",
]


@dataclass
class InverseResult:
    """Output of :func:`inverse_solve`.

    ``h[i-1]`` and ``t[i-1]`` belong to step ``i``; ``snapshots`` maps a
    step index to the nodal vector stored for it (always including ``n``).
    ``u_errors`` holds the per-step L2 error when the spec carries an exact
    solution, else ``None``.
    """

    t: np.ndarray
    h: np.ndarray
    m_prime: np.ndarray
    u_final: np.ndarray
    snapshots: dict
    measurement_residuals: np.ndarray
    energy: dict
    cg_iterations: np.ndarray
    u_errors: np.ndarray = None
    trajectory: np.ndarray = None
    omega: np.ndarray = field(default=None, repr=False)


@dataclass
class StepLoads:
    """Load vectors of one time step that do not involve ``h_i`` or ``u_i``."""

    p: np.ndarray
    F: np.ndarray
    f: np.ndarray
    eta_dGdt: np.ndarray
    g: np.ndarray

    @property
    def omega(self):
        return float(self.p.sum())

    def known_integral(self):
        """Sum of every integral entering the h-formula except ``m'``."""
        return float(self.eta_dGdt.sum() + self.g.sum() + self.F.sum() + self.f.sum())


def step_loads(spec, mesh, u_prev, t, forcing=None):
    """Assemble the data load vectors at time ``t`` with ``F`` lagged at ``u_prev``.

    ``forcing`` overrides ``spec.f`` (used by the direct solver).
    """
    if forcing is None:
        forcing = spec.f
    F_vals = np.asarray(spec.F(fem.values_at_quadrature(mesh, u_prev)), dtype=float)
    F_vals = np.broadcast_to(F_vals, fem.quadrature_points(mesh).shape[:2])
    n = mesh.node_count

    def eta_dGdt(t_, x, normal):
        return np.asarray(spec.eta(t_, x)) * np.asarray(spec.dGdt(t_, x, normal))

    return StepLoads(
        p=fem.assemble_domain_load(mesh, spec.p, t),
        F=fem.load_from_quadrature_values(mesh, F_vals),
        f=np.zeros(n) if forcing is None else fem.assemble_domain_load(mesh, forcing, t),
        eta_dGdt=fem.assemble_boundary_load(mesh, eta_dGdt, t),
        g=fem.assemble_boundary_load(mesh, spec.g, t),
    )


def _h_from_loads(loads, m_prime_i, omega_min, t, step=None):
    omega = loads.omega
    if not abs(omega) >= omega_min:
        where = "" if step is None else f"step {step} "
        exc = DegenerateProfileError(
            f"{where}|omega({t:.6g})| = {abs(omega):.3e} is below omega_min = {omega_min:.3e}"
        )
        exc.step = step
        raise exc
    return (m_prime_i - loads.known_integral()) / omega


def recover_h_step(spec, mesh, u_prev, t_i, m_prime_i, omega_min=1e-8):
    """Explicit source amplitude at ``t_i`` from the previous state ``u_prev``."""
    loads = step_loads(spec, mesh, u_prev, t_i)
    return _h_from_loads(loads, m_prime_i, omega_min, t_i)


def system_matrix(spec, mesh, t, tau, mass=None):
    """Return ``(A, K_eta)`` with ``A = M/tau + K_eta/tau + K_kappa`` at time ``t``."""
    M = fem.assemble_mass(mesh) if mass is None else mass
    K_eta = fem.assemble_weighted_stiffness(mesh, spec.eta, t)
    K_kappa = fem.assemble_weighted_stiffness(mesh, spec.kappa, t)
    return (M + K_eta) / tau + K_kappa, K_eta


class _Stepper:
    """State shared by the inverse and the direct driver."""

    def __init__(self, spec, mesh, grid, cg_rel_tol, cg_max_iter):
        self.spec = spec
        self.mesh = mesh
        self.grid = grid
        self.tau = grid.tau
        self.M = fem.assemble_mass(mesh)
        self.K1 = fem.assemble_weighted_stiffness(mesh, lambda t, x: 1.0, 0.0)
        self.lumped = np.asarray(self.M.sum(axis=1)).ravel()
        self.cg_rel_tol = cg_rel_tol
        self.cg_max_iter = cg_max_iter

    def advance(self, i, u_prev, rhs_data, t):
        A, K_eta = system_matrix(self.spec, self.mesh, t, self.tau, mass=self.M)
        b = rhs_data + (self.M @ u_prev + K_eta @ u_prev) / self.tau
        try:
            u, (iters, _) = fem.solve_spd(
                A, b, rel_tol=self.cg_rel_tol, max_iter=self.cg_max_iter,
                x0=u_prev, return_info=True,
            )
        except ConvergenceError as exc:
            exc.step = i
            exc.args = (f"step {i} (t={t:.6g}): {exc.args[0]}",)
            raise
        return u, iters


def inverse_solve(
    spec,
    mesh,
    grid,
    m_prime_values=None,
    cg_rel_tol=1e-12,
    cg_max_iter=None,
    omega_min=1e-8,
    snapshot_steps=(),
    store_trajectory=False,
):
    """Recover ``h`` and ``u`` on ``grid``.

    Parameters
    ----------
    spec : ProblemSpec
    mesh : Mesh
    grid : TimeGrid
    m_prime_values : array_like, optional
        ``m'(t_1), ..., m'(t_n)``. Defaults to ``spec.m_prime`` at the nodes.
    cg_rel_tol, cg_max_iter
        Passed to :func:`isp.fem.solve_spd`.
    omega_min : float
        Smallest admissible ``|integral of p|``.
    snapshot_steps : iterable of int
        Step indices whose state is kept besides the final one.
    store_trajectory : bool
        Keep every state (``trajectory`` has shape ``(n+1, node_count)``).
    """
    n = grid.n
    tau = grid.tau
    times = grid.nodes[1:]
    if m_prime_values is None:
        m_prime_values = np.array([spec.m_prime(t) for t in times], dtype=float)
    m_prime_values = np.asarray(m_prime_values, dtype=float)
    if m_prime_values.shape != (n,):
        raise ValueError(f"expected {n} values of m', got shape {m_prime_values.shape}")

    st = _Stepper(spec, mesh, grid, cg_rel_tol, cg_max_iter)
    u = fem.interpolate(mesh, spec.u0, 0.0)
    keep = {int(k) for k in snapshot_steps}
    snapshots = {0: u.copy()} if 0 in keep else {}
    traj = [u.copy()] if store_trajectory else None

    h = np.empty(n)
    omega = np.empty(n)
    resid = np.empty(n)
    iters = np.empty(n, dtype=int)
    errs = np.empty(n) if spec.exact_u is not None else None
    sum_du = sum_grad_du = sum_h2 = 0.0
    max_grad_u = float(u @ (st.K1 @ u))

    for i in range(1, n + 1):
        t = times[i - 1]
        loads = step_loads(spec, mesh, u, t)
        hi = _h_from_loads(loads, m_prime_values[i - 1], omega_min, t, i)
        rhs = hi * loads.p + loads.F + loads.f + loads.eta_dGdt + loads.g
        u_new, iters[i - 1] = st.advance(i, u, rhs, t)

        du = (u_new - u) / tau
        resid[i - 1] = abs(st.lumped @ du - m_prime_values[i - 1])
        sum_du += float(du @ (st.M @ du)) * tau
        sum_grad_du += float(du @ (st.K1 @ du)) * tau
        sum_h2 += hi * hi * tau
        max_grad_u = max(max_grad_u, float(u_new @ (st.K1 @ u_new)))
        h[i - 1] = hi
        omega[i - 1] = loads.omega
        if errs is not None:
            errs[i - 1] = fem.l2_norm(mesh, fem.interpolate(mesh, spec.exact_u, t) - u_new, st.M)
        u = u_new
        if i in keep:
            snapshots[i] = u.copy()
        if traj is not None:
            traj.append(u.copy())

    snapshots[n] = u.copy()
    energy = {
        "sum_du_l2": sum_du,
        "sum_grad_du_l2": sum_grad_du,
        "max_grad_u_l2": max_grad_u,
        "sum_h2": float(sum_h2),
    }
    return InverseResult(
        t=times,
        h=h,
        m_prime=m_prime_values,
        u_final=u,
        snapshots=snapshots,
        measurement_residuals=resid,
        energy=energy,
        cg_iterations=iters,
        u_errors=errs,
        trajectory=None if traj is None else np.array(traj),
        omega=omega,
    )


def direct_solve(spec, mesh, grid, source, cg_rel_tol=1e-12, cg_max_iter=None):
    """Solve the direct problem with known right-hand side ``source``.

    ``source(t, x)`` replaces ``p h + f``; ``spec.p`` and ``spec.f`` are not
    used. Returns the nodal trajectory, shape ``(n + 1, node_count)``.
    """
    st = _Stepper(spec, mesh, grid, cg_rel_tol, cg_max_iter)
    u = fem.interpolate(mesh, spec.u0, 0.0)
    out = np.empty((grid.n + 1, mesh.node_count))
    out[0] = u
    for i in range(1, grid.n + 1):
        t = grid.t(i)
        loads = step_loads(spec, mesh, u, t, forcing=source)
        rhs = loads.F + loads.f + loads.eta_dGdt + loads.g
        u, _ = st.advance(i, u, rhs, t)
        out[i] = u
    return out
