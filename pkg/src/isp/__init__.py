"""Reconstruction of a time-dependent source amplitude in a semilinear
pseudo-parabolic equation with Neumann data from the integral of the state.

Submodules
----------
mesh            structured interval / unit-square meshes
fem             P1 assembly and the SPD solver
problem         problem data and time grid
rothe           backward-Euler inverse and direct solvers
regularization  noisy measurements and polynomial fitting
experiments     manufactured cases, error metrics, convergence studies
cli             the ``isp`` command
"""

from .errors import (
    CoefficientBoundError,
    ConfigError,
    ConvergenceError,
    DegenerateProfileError,
    FitError,
    InvalidArgumentError,
    InvalidMatrixError,
    ISPError,
)
from .mesh import Mesh, build_interval_mesh, build_unit_square_mesh
from .problem import ProblemSpec, TimeGrid
from .rothe import InverseResult, direct_solve, inverse_solve, recover_h_step
from .experiments import build_case, compute_errors, convergence_study, run_noisy

__version__ = "0.1.0"
