"""Problem data for the inverse source problem and the uniform time grid."""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import fem
from .errors import CoefficientBoundError, DegenerateProfileError, InvalidArgumentError

__all__ = ["ProblemSpec", "TimeGrid", "zero_field", "zero_boundary_field"]


def zero_field(t, x):
    return 0.0


def zero_boundary_field(t, x, normal):
    return 0.0


@dataclass(frozen=True)
class ProblemSpec:
    """All given data of

        u_t - div(eta grad u_t) - div(kappa grad u) = F(u) + p h + f,
        kappa grad u . n = g on the boundary,  u(0) = u0,
        integral of u over the domain = m.

    Domain fields take ``(t, x)``; ``g`` and ``dGdt`` take ``(t, x, normal)``.
    ``dGdt`` is the time derivative of ``g / kappa``. ``F`` acts elementwise
    on arrays. ``f`` is an optional known forcing.
    """

    eta: Callable
    kappa: Callable
    F: Callable
    p: Callable
    g: Callable
    dGdt: Callable
    u0: Callable
    m: Callable
    m_prime: Callable
    T: float = 1.0
    f: Optional[Callable] = None
    lipschitz_F: Optional[float] = None
    exact_u: Optional[Callable] = None
    exact_h: Optional[Callable] = None

    def validate(self, mesh, grid, omega_min=1e-8, n_lipschitz=64, seed=0):
        """Spot-check the standing assumptions on ``mesh`` x ``grid``.

        Checks positivity of eta and kappa at every quadrature point and
        time node, ``|omega(t_i)| >= omega_min`` and the Lipschitz bound of
        ``F`` on random pairs. Returns ``(eta_min, kappa_min, omega_abs_min)``.
        """
        pts = fem.quadrature_points(mesh).reshape(-1, mesh.dim)
        eta_min = kappa_min = np.inf
        omega_abs = np.inf
        for t in grid.nodes:
            e = np.broadcast_to(np.asarray(self.eta(t, pts), float), pts.shape[:1])
            k = np.broadcast_to(np.asarray(self.kappa(t, pts), float), pts.shape[:1])
            eta_min = min(eta_min, e.min())
            kappa_min = min(kappa_min, k.min())
            omega_abs = min(omega_abs, abs(self.omega(mesh, t)))
        if not eta_min > 0:
            raise CoefficientBoundError(f"eta not bounded away from zero (min {eta_min})")
        if not kappa_min > 0:
            raise CoefficientBoundError(f"kappa not bounded away from zero (min {kappa_min})")
        if omega_abs < omega_min:
            raise DegenerateProfileError(
                f"|integral of p| = {omega_abs:.3e} < omega_min = {omega_min:.3e}"
            )
        if self.lipschitz_F is not None:
            rng = np.random.default_rng(seed)
            s1, s2 = rng.uniform(-10, 10, size=(2, n_lipschitz))
            lhs = np.abs(np.asarray(self.F(s1)) - np.asarray(self.F(s2)))
            if np.any(lhs > self.lipschitz_F * np.abs(s1 - s2) * (1 + 1e-12)):
                raise InvalidArgumentError("F violates its declared Lipschitz constant")
        return eta_min, kappa_min, omega_abs

    def omega(self, mesh, t):
        """Quadrature value of the integral of ``p(t, .)``."""
        return float(np.sum(fem.assemble_domain_load(mesh, self.p, t)))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_i = i T / n``, ``i = 0..n``."""

    T: float
    n: int

    def __post_init__(self):
        if not self.T > 0:
            raise InvalidArgumentError(f"T must be positive, got {self.T}")
        if int(self.n) != self.n or self.n < 1:
            raise InvalidArgumentError(f"n must be a positive integer, got {self.n}")

    @property
    def tau(self):
        return self.T / self.n

    @property
    def nodes(self):
        return np.arange(self.n + 1) * self.T / self.n

    def t(self, i):
        return i * self.T / self.n

    @classmethod
    def from_tau(cls, T, tau):
        n = round(T / tau)
        if abs(n * tau - T) > 1e-12 * T:
            raise InvalidArgumentError(f"tau={tau} does not divide T={T}")
        return cls(T, n)
