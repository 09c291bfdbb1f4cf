"""Noisy integral measurements and their polynomial regularization.

Noise is multiplicative, ``m_eps(t_j) = m(t_j) (1 + eps R_j)`` with ``R_j``
uniform on [-1, 1], drawn from a SplitMix64 stream so that a seed fixes the
series on every platform. The derivative ``m'`` needed by the reconstruction
is taken analytically from a least-squares polynomial fitted in the scaled
variable ``s = 2 t / T - 1``.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import FitError, InvalidArgumentError

__all__ = [
    "SplitMix64",
    "MeasurementSeries",
    "PolyFit",
    "generate_noisy",
    "fit_polynomial",
    "l2_discrete",
    "relative_improvement",
    "select_degree",
    "select_from_residuals",
    "eval_fit_derivative",
    "degree_table",
    "write_polyfit_csv",
]

_MASK = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 generator (Steele, Lea and Flood constants)."""

    def __init__(self, seed):
        self.state = int(seed) & _MASK

    def next_u64(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform01(self):
        """Top 53 bits as a double in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0**-53

    def symmetric(self, size):
        """``size`` draws uniform on [-1, 1)."""
        return np.array([2.0 * self.uniform01() - 1.0 for _ in range(size)])


@dataclass(frozen=True)
class MeasurementSeries:
    t: np.ndarray
    values: np.ndarray
    exact: np.ndarray
    epsilon: float
    seed: int
    T: float

    @property
    def n_intervals(self):
        return self.t.shape[0] - 1


def generate_noisy(m, T, n_samples=100, epsilon=0.0, seed=0):
    """Sample ``m`` at ``t_j = j T / n_samples``, ``j = 0..n_samples``, and perturb it.

    With ``epsilon == 0`` the values equal ``m(t_j)`` exactly and no random
    numbers are consumed.
    """
    if not epsilon >= 0:
        raise InvalidArgumentError(f"noise level must be non-negative, got {epsilon}")
    if int(n_samples) != n_samples or n_samples < 1:
        raise InvalidArgumentError(f"n_samples must be a positive integer, got {n_samples}")
    n_samples = int(n_samples)
    t = np.arange(n_samples + 1) * T / n_samples
    exact = np.array([m(tj) for tj in t], dtype=float)
    if epsilon == 0:
        values = exact.copy()
    else:
        values = exact * (1.0 + epsilon * SplitMix64(seed).symmetric(n_samples + 1))
    return MeasurementSeries(t, values, exact, float(epsilon), int(seed), float(T))


def l2_discrete(v):
    """``sqrt(mean(v**2))``, the averaged discrete l2 norm."""
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(np.mean(v * v)))


def _powers(degree, parity):
    if parity == "any":
        return np.arange(degree + 1)
    if parity == "even":
        return np.arange(0, degree + 1, 2)
    if parity == "odd":
        return np.arange(1, degree + 1, 2)
    raise InvalidArgumentError(f"unknown parity {parity!r}")


@dataclass(frozen=True)
class PolyFit:
    """Least-squares polynomial in ``s = 2 t / T - 1``.

    ``coefficients[k]`` multiplies ``s**k``; powers excluded by the parity
    are exactly zero.
    """

    degree: int
    parity: str
    coefficients: np.ndarray
    T: float
    residual: float

    def __call__(self, t):
        s = 2.0 * np.asarray(t, dtype=float) / self.T - 1.0
        return np.polynomial.polynomial.polyval(s, self.coefficients)

    def derivative(self, t):
        s = 2.0 * np.asarray(t, dtype=float) / self.T - 1.0
        dc = np.polynomial.polynomial.polyder(self.coefficients)
        return np.polynomial.polynomial.polyval(s, dc) * (2.0 / self.T)


def fit_polynomial(series, degree, parity="any"):
    """Fit ``series.values`` by a polynomial of ``degree`` restricted to ``parity``.

    Solved through a QR factorization of the scaled Vandermonde matrix.
    """
    degree = int(degree)
    if degree < 0:
        raise InvalidArgumentError(f"degree must be >= 0, got {degree}")
    n = series.t.shape[0]
    if degree >= n:
        raise InvalidArgumentError(f"degree {degree} needs more than {n} samples")
    powers = _powers(degree, parity)
    if powers.size == 0:
        raise InvalidArgumentError(f"no {parity} powers up to degree {degree}")
    s = 2.0 * series.t / series.T - 1.0
    V = s[:, None] ** powers[None, :]
    Q, R = np.linalg.qr(V)
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-12 * diag.max():
        raise FitError(f"design matrix of degree {degree} ({parity}) is rank deficient")
    c = solve_triangular(R, Q.T @ series.values)
    coeffs = np.zeros(degree + 1)
    coeffs[powers] = c
    resid = l2_discrete(V @ c - series.values)
    return PolyFit(degree, parity, coeffs, series.T, resid)


def relative_improvement(series, d_prev, d_next, parity="any"):
    """Percentage drop of the fit residual from ``d_prev`` to ``d_next``."""
    e_prev = fit_polynomial(series, d_prev, parity).residual
    e_next = fit_polynomial(series, d_next, parity).residual
    return _improvement(e_prev, e_next)


def _improvement(e_prev, e_next):
    if e_prev == 0:
        raise FitError("relative improvement undefined: previous residual is zero")
    return 100.0 * (e_prev - e_next) / e_prev


def _first_degree(parity):
    return 1 if parity == "odd" else 0


def select_degree(series, parity="any", max_degree=10, threshold_percent=5.0):
    """Smallest degree after which the next step improves by less than the threshold.

    Candidates step by 1 (``parity='any'``) or by 2. A residual at the
    round-off level ends the search. Falls back to the largest candidate not
    exceeding ``max_degree``.
    """
    d = _first_degree(parity)
    if max_degree < d:
        raise InvalidArgumentError(f"max_degree {max_degree} below first candidate {d}")
    floor = 1e-13 * max(l2_discrete(series.values), np.finfo(float).tiny)
    step = 1 if parity == "any" else 2
    degrees = list(range(d, max_degree + 1, step))
    cache = {}

    def residual(k):
        if k not in cache:
            cache[k] = fit_polynomial(series, degrees[k], parity).residual
        return cache[k]

    return _apply_rule(degrees, residual, threshold_percent, floor)


def select_from_residuals(degrees, residuals, threshold_percent=5.0, floor=0.0):
    """The degree rule of :func:`select_degree` applied to a precomputed curve.

    Useful for curves averaged over several noise realizations.
    """
    degrees = [int(d) for d in degrees]
    if len(degrees) != len(residuals) or not degrees:
        raise InvalidArgumentError("degrees and residuals must be non-empty and aligned")
    return _apply_rule(degrees, lambda k: float(residuals[k]), threshold_percent, floor)


def _apply_rule(degrees, residual, threshold_percent, floor):
    for k in range(len(degrees) - 1):
        e = residual(k)
        if e <= floor or _improvement(e, residual(k + 1)) < threshold_percent:
            return degrees[k]
    return degrees[-1]


def eval_fit_derivative(fit, t):
    """Exact derivative of the fitted polynomial with respect to ``t``."""
    return fit.derivative(t)


def degree_table(series, degrees, parity="any"):
    """Rows ``(degree, residual, r_im)`` for consecutive candidate degrees.

    ``r_im`` is ``None`` for the first row.
    """
    rows = []
    prev = None
    for d in degrees:
        e = fit_polynomial(series, d, parity).residual
        rows.append((int(d), e, None if prev is None else _improvement(prev, e)))
        prev = e
    return rows


def write_polyfit_csv(path, series, fit, exact_derivative=None):
    """Columns ``t, m_exact, m_noisy, p_fit, p_fit_derivative`` (plus exact m')."""
    header = ["t", "m_exact", "m_noisy", "p_fit", "p_fit_derivative"]
    if exact_derivative is not None:
        header.append("m_prime_exact")
    p = fit(series.t)
    dp = fit.derivative(series.t)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for j, t in enumerate(series.t):
            row = [t, series.exact[j], series.values[j], p[j], dp[j]]
            if exact_derivative is not None:
                row.append(exact_derivative(t))
            w.writerow([format_float(v) for v in row])


def format_float(v):
    """Scientific notation with 17 significant digits."""
    return f"{float(v):.16e}"
