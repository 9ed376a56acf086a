"""Dense complex linear algebra, ODE integration, and derivative-free fitting.

Conventions used throughout the package:
  * matrices are dense, row-major ``numpy.ndarray`` of complex128
  * all functions here are pure; inputs are never mutated
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.integrate
import scipy.optimize

DEFAULT_MAX_DIM = 16384


class NumericsError(Exception):
    pass


class DimensionError(NumericsError):
    """Operands have incompatible or oversized dimensions."""


class SingularMatrixError(NumericsError):
    """A pivot fell below the singularity threshold during LU factorization."""


class OdeError(NumericsError):
    """Adaptive integrator could not satisfy the error tolerance."""


def as_cmatrix(a, max_dim: int = DEFAULT_MAX_DIM) -> np.ndarray:
    """Validate and convert `a` to a dense complex matrix.

    Rejects empty, non-2D, oversized, and non-finite input.
    """
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.size == 0:
        raise DimensionError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if max(m.shape) > max_dim:
        raise DimensionError(f"matrix dimension {max(m.shape)} exceeds cap {max_dim}")
    if not np.all(np.isfinite(m.view(float))):
        raise NumericsError("matrix contains non-finite entries")
    return m


def kron(a, b, max_dim: int = DEFAULT_MAX_DIM) -> np.ndarray:
    """Kronecker product with the left factor varying slowest.

    Raises DimensionError if the product dimension would exceed `max_dim`
    (the Hilbert space is too large for dense storage).
    """
    a = as_cmatrix(a, max_dim)
    b = as_cmatrix(b, max_dim)
    if a.shape[0] * b.shape[0] > max_dim or a.shape[1] * b.shape[1] > max_dim:
        raise DimensionError(
            f"kron product {a.shape[0] * b.shape[0]}x{a.shape[1] * b.shape[1]} "
            f"exceeds cap {max_dim}"
        )
    return np.kron(a, b)


def solve_linear(a, rhs) -> np.ndarray:
    """Solve a x = rhs by pivoted LU.

    Raises SingularMatrixError when any pivot magnitude is below
    1e-14 * ||a|| (e.g. a Liouvillian without its trace constraint row).
    """
    a = as_cmatrix(a)
    rhs = np.asarray(rhs, dtype=complex)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"matrix must be square, got {a.shape}")
    if rhs.shape[0] != a.shape[0]:
        raise DimensionError(f"rhs length {rhs.shape[0]} != matrix order {a.shape[0]}")
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    scale = np.linalg.norm(a)
    pivots = np.abs(np.diag(lu))
    if np.any(pivots < 1e-14 * scale):
        raise SingularMatrixError(
            f"pivot magnitude {pivots.min():.3e} below 1e-14 * ||a|| = {1e-14 * scale:.3e}"
        )
    return scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)


def integrate_ode(
    deriv: Callable[[float, np.ndarray], np.ndarray],
    y0,
    t_span: tuple[float, float],
    tol: float = 1e-9,
    t_eval: Sequence[float] | None = None,
) -> np.ndarray:
    """Integrate dy/dt = deriv(t, y) with an adaptive embedded RK 4(5) pair.

    `tol` bounds the local error per step (used as both relative and
    absolute tolerance). Returns the state at the final time, or an array of
    states (one row per requested time) when `t_eval` is given.
    """
    if not 1e-12 <= tol <= 1e-3:
        raise ValueError(f"tol must lie in [1e-12, 1e-3], got {tol}")
    y0 = np.asarray(y0, dtype=complex)
    sol = scipy.integrate.solve_ivp(
        deriv,
        t_span,
        y0,
        method="RK45",
        rtol=tol,
        atol=tol * 1e-3,
        t_eval=t_eval,
        dense_output=False,
    )
    if not sol.success:
        raise OdeError(f"integrator failed: {sol.message}")
    if t_eval is not None:
        return sol.y.T
    return sol.y[:, -1]


@dataclass(frozen=True)
class FitResult:
    parameters: np.ndarray
    residual_norm: float
    covariance_estimate: np.ndarray
    iterations: int
    converged: bool


def _covariance(model, params, data, residual_norm):
    """Gauss-Newton covariance estimate sigma^2 (J^T J)^-1 at the optimum."""
    n_par = len(params)
    n_dat = len(data)
    jac = np.empty((n_dat, n_par))
    for k in range(n_par):
        h = 1e-6 * max(1.0, abs(params[k]))
        up = np.array(params)
        dn = np.array(params)
        up[k] += h
        dn[k] -= h
        jac[:, k] = (np.asarray(model(up)) - np.asarray(model(dn))).real / (2 * h)
    dof = max(n_dat - n_par, 1)
    sigma2 = residual_norm**2 / dof
    jtj = jac.T @ jac
    try:
        cov = sigma2 * np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        cov = sigma2 * np.linalg.pinv(jtj)
    # symmetrize against round-off
    return 0.5 * (cov + cov.T)


def fit_least_squares(
    model: Callable[[np.ndarray], np.ndarray],
    data,
    initial,
    bounds: Sequence[tuple[float, float]] | None = None,
    max_iterations: int = 20000,
) -> FitResult:
    """Minimize ||model(p) - data||^2 by Nelder-Mead with boundary projection.

    The converged flag is set when the simplex collapses below 1e-8 relative
    diameter; on non-convergence the best point found is still returned.
    """
    data = np.asarray(data, dtype=float)
    initial = np.asarray(initial, dtype=float)
    if data.size < initial.size:
        raise ValueError("need at least as many data points as parameters")
    if bounds is not None:
        bounds = [tuple(b) for b in bounds]
        if len(bounds) != initial.size:
            raise ValueError("one (lo, hi) bound pair per parameter required")
        for p, (lo, hi) in zip(initial, bounds):
            if not lo <= p <= hi:
                raise ValueError(f"initial value {p} outside bounds [{lo}, {hi}]")

    def objective(p):
        if bounds is not None:
            p = np.clip(p, [b[0] for b in bounds], [b[1] for b in bounds])
        r = np.asarray(model(p), dtype=float) - data
        return float(r @ r)

    scale = max(1.0, float(np.max(np.abs(initial))) if initial.size else 1.0)
    res = scipy.optimize.minimize(
        objective,
        initial,
        method="Nelder-Mead",
        bounds=bounds,
        options={
            "xatol": 1e-8 * scale,
            "fatol": 1e-16,
            "maxiter": max_iterations,
            "maxfev": max_iterations,
        },
    )
    params = res.x
    if bounds is not None:
        params = np.clip(params, [b[0] for b in bounds], [b[1] for b in bounds])
    residual_norm = float(np.sqrt(max(res.fun, 0.0)))
    cov = _covariance(model, params, data, residual_norm)
    return FitResult(
        parameters=params,
        residual_norm=residual_norm,
        covariance_estimate=cov,
        iterations=int(res.nit),
        converged=bool(res.success),
    )
