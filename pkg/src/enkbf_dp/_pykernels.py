"""NumPy reference kernels; used when the compiled extension is unavailable."""

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import DivergenceError, WellPosednessError

NAME = "python"


def enkbf_step(particles, kappa, y, noise_var, dt):
    """One deterministic EnKBF update of ``particles`` (J x Ds) in place.

    Only the first ``len(y)`` state coordinates are observed, through the
    diagonal ``kappa``.
    """
    J = particles.shape[0]
    d = y.shape[0]
    mean = particles.mean(axis=0)
    anom = particles - mean
    cov = anom.T @ anom / (J - 1)
    cross = cov[:, :d] * kappa
    system = dt * (kappa[:, None] * cov[:d, :d] * kappa)
    system[np.diag_indices(d)] += noise_var
    try:
        gain_t = cho_solve(cho_factor(system), dt * cross.T)
    except LinAlgError as exc:
        raise DivergenceError(f"gain system not positive definite: {exc}") from exc
    innov = 0.5 * (particles[:, :d] * kappa + kappa * mean[:d] - 2.0 * y)
    particles -= innov @ gain_t


def mean_residual(particles, kappa, y):
    d = y.shape[0]
    with np.errstate(invalid="ignore", over="ignore"):  # callers check finiteness
        r = kappa * particles[:, :d].mean(axis=0) - y
        return float(r @ r)


def advance(particles, kappa, y, noise_var, dt, k0, k_max, threshold, residuals):
    """Iterate until ``k >= k0`` and the residual at the mean is ``<= threshold``.

    ``residuals[k]`` receives the residual after ``k`` steps.  Returns the
    final step count, which equals ``k_max`` when the cap is reached.
    """
    k = 0
    residuals[0] = mean_residual(particles, kappa, y)
    if k >= k0 and residuals[0] <= threshold:
        return 0
    while k < k_max:
        enkbf_step(particles, kappa, y, noise_var, dt)
        k += 1
        r = mean_residual(particles, kappa, y)
        if not np.isfinite(r):
            raise DivergenceError(f"non-finite ensemble after step {k}; reduce dt")
        residuals[k] = r
        if k >= k0 and r <= threshold:
            break
    return k


def tridiag_solve(lower, diag, upper, rhs):
    """Thomas algorithm for a tridiagonal system with sub/super diagonals of length m-1."""
    m = diag.shape[0]
    c = np.empty(m)
    x = np.empty(m)
    beta = diag[0]
    if beta == 0.0:
        raise WellPosednessError("zero pivot in tridiagonal solve")
    x[0] = rhs[0] / beta
    for j in range(1, m):
        c[j - 1] = upper[j - 1] / beta
        beta = diag[j] - lower[j - 1] * c[j - 1]
        if beta == 0.0:
            raise WellPosednessError("zero pivot in tridiagonal solve")
        x[j] = (rhs[j] - lower[j - 1] * x[j - 1]) / beta
    for j in range(m - 2, -1, -1):
        x[j] -= c[j] * x[j + 1]
    return x
