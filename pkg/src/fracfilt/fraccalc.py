"""Discrete Riemann-Liouville operators on uniform time grids.

J^beta is the fractional integral (convolution with t^(beta-1)/Gamma(beta));
the fractional derivative of order 1-beta is d/dt J^beta.  The quadrature is
the product-trapezoidal (L1-type) rule, exact for piecewise-linear data, so
J^beta applied to a constant reproduces t^beta/Gamma(1+beta) at every node up
to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import gamma

__all__ = [
    "GridFunction",
    "trapezoid_weights",
    "fractional_integral",
    "riemann_liouville_derivative",
]


@dataclass(frozen=True)
class GridFunction:
    """Samples f(k * step), k = 0..M, on a uniform grid."""

    step: float
    values: np.ndarray

    def __post_init__(self):
        if self.step <= 0.0:
            raise ValueError("step must be positive")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")

    @property
    def times(self) -> np.ndarray:
        return self.step * np.arange(len(self.values))


def trapezoid_weights(beta: float, n_steps: int, step: float) -> tuple[np.ndarray, np.ndarray]:
    """Kernel moment arrays (P, Q) of the product-trapezoidal rule, 1-indexed by lag.

    Over the m-th lag subinterval the exact kernel moments are
    A_m = int u^(b-1) du and B_m = (1/step) int u^b du; the piecewise-linear rule
    assigns P_m = m A_m - B_m to the newer sample and Q_m = A_m - P_m to the older:

        Gamma(b) J^b f(t_n) = sum_{j=0}^{n-1} [ f_j Q_{n-j} + f_{j+1} P_{n-j} ].
    """
    m = np.arange(0, n_steps + 1, dtype=float)
    A = (m[1:] ** beta - m[:-1] ** beta) / beta * step ** beta
    B = (m[1:] ** (beta + 1.0) - m[:-1] ** (beta + 1.0)) / (beta + 1.0) * step ** beta
    P = np.arange(1, n_steps + 1, dtype=float) * A - B
    Q = A - P
    return P, Q


def fractional_integral(f: GridFunction, beta: float) -> GridFunction:
    """(J^beta f)(t_k) for all grid nodes; (J^beta f)(0) = 0.

    beta in (0, 1]; beta = 1 reduces to the plain cumulative trapezoid integral.
    """
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"fractional integral order must lie in (0, 1], got {beta}")
    vals = np.asarray(f.values, dtype=float)
    M = len(vals) - 1
    out = np.zeros(M + 1)
    if M == 0:
        return GridFunction(step=f.step, values=out)
    P, Q = trapezoid_weights(beta, M, f.step)
    ext = np.concatenate(([0.0], Q))
    older = fftconvolve(vals, ext)[1 : M + 1]
    ext = np.concatenate(([0.0], P))
    newer = fftconvolve(vals[1:], ext)[1 : M + 1]
    out[1:] = (older + newer) / gamma(beta)
    return GridFunction(step=f.step, values=out)


def riemann_liouville_derivative(f: GridFunction, beta: float) -> GridFunction:
    """Riemann-Liouville derivative of order 1-beta: forward difference of J^beta f.

    The last node falls back to a backward difference; everywhere else the
    one-sided forward quotient of the fractional integral is used.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    J = fractional_integral(f, beta).values
    out = np.empty_like(J)
    out[:-1] = np.diff(J) / f.step
    out[-1] = (J[-1] - J[-2]) / f.step
    return GridFunction(step=f.step, values=out)
