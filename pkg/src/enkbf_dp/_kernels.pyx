# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled EnKBF and tridiagonal kernels.

Dense linear algebra goes through the BLAS/LAPACK that SciPy ships, so the
whole filter loop runs without touching the interpreter.  Arrays are
C-ordered; a C-ordered (J, Ds) array is read by BLAS as the column-major
(Ds, J) matrix of its transpose.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport isfinite
from scipy.linalg.cython_blas cimport dgemm, dsyrk
from scipy.linalg.cython_lapack cimport dposv

from .errors import DivergenceError, WellPosednessError

cnp.import_array()

NAME = "compiled"


cdef class _Workspace:
    cdef double[::1] mean
    cdef double[::1] anom
    cdef double[::1] cov
    cdef double[::1] system
    cdef double[::1] gain_t
    cdef double[::1] innov

    def __init__(self, Py_ssize_t J, Py_ssize_t ds, Py_ssize_t d):
        self.mean = np.empty(ds)
        self.anom = np.empty(J * ds)
        self.cov = np.empty(ds * ds)
        self.system = np.empty(d * d)
        self.gain_t = np.empty(d * ds)
        self.innov = np.empty(J * d)


cdef inline double _cov(double[::1] cov, Py_ssize_t r, Py_ssize_t c, Py_ssize_t ds) nogil:
    # dsyrk fills the column-major upper triangle
    if r <= c:
        return cov[r + c * ds]
    return cov[c + r * ds]


cdef void _column_mean(double[:, ::1] p, double[::1] mean) noexcept nogil:
    cdef Py_ssize_t J = p.shape[0], ds = p.shape[1], j, c
    for c in range(ds):
        mean[c] = 0.0
    for j in range(J):
        for c in range(ds):
            mean[c] += p[j, c]
    for c in range(ds):
        mean[c] /= J


cdef double _residual(double[::1] mean, double[::1] kappa, double[::1] y) noexcept nogil:
    cdef Py_ssize_t i, d = y.shape[0]
    cdef double r, acc = 0.0
    for i in range(d):
        r = kappa[i] * mean[i] - y[i]
        acc += r * r
    return acc


cdef int _step(double[:, ::1] p, double[::1] kappa, double[::1] y, double noise_var,
               double dt, _Workspace ws) noexcept nogil:
    cdef int J = <int>p.shape[0]
    cdef int ds = <int>p.shape[1]
    cdef int d = <int>y.shape[0]
    cdef int j, c, i, l, info = 0
    cdef double alpha = 1.0 / (J - 1), zero = 0.0, one = 1.0, minus_one = -1.0
    cdef char uplo = b'U'
    cdef char no_t = b'N'
    cdef char yes_t = b'T'

    _column_mean(p, ws.mean)
    for j in range(J):
        for c in range(ds):
            ws.anom[j * ds + c] = p[j, c] - ws.mean[c]
    dsyrk(&uplo, &no_t, &ds, &J, &alpha, &ws.anom[0], &ds, &zero, &ws.cov[0], &ds)

    for l in range(d):
        for i in range(d):
            ws.system[i + l * d] = dt * kappa[i] * kappa[l] * _cov(ws.cov, i, l, ds)
        ws.system[l + l * d] += noise_var
    for c in range(ds):
        for i in range(d):
            ws.gain_t[i + c * d] = dt * _cov(ws.cov, c, i, ds) * kappa[i]
    dposv(&uplo, &d, &ds, &ws.system[0], &d, &ws.gain_t[0], &d, &info)
    if info != 0:
        return info

    for j in range(J):
        for i in range(d):
            ws.innov[j * d + i] = 0.5 * (kappa[i] * p[j, i] + kappa[i] * ws.mean[i] - 2.0 * y[i])
    dgemm(&yes_t, &no_t, &ds, &J, &d, &minus_one, &ws.gain_t[0], &d, &ws.innov[0], &d,
          &one, &p[0, 0], &ds)
    return 0


def enkbf_step(double[:, ::1] particles, double[::1] kappa, double[::1] y,
               double noise_var, double dt):
    cdef _Workspace ws = _Workspace(particles.shape[0], particles.shape[1], y.shape[0])
    cdef int info
    with nogil:
        info = _step(particles, kappa, y, noise_var, dt, ws)
    if info != 0:
        raise DivergenceError(f"gain system not positive definite (LAPACK info={info})")


def mean_residual(double[:, ::1] particles, double[::1] kappa, double[::1] y):
    cdef double[::1] mean = np.empty(particles.shape[1])
    _column_mean(particles, mean)
    return _residual(mean, kappa, y)


def advance(double[:, ::1] particles, double[::1] kappa, double[::1] y, double noise_var,
            double dt, long k0, long k_max, double threshold, double[::1] residuals):
    cdef _Workspace ws = _Workspace(particles.shape[0], particles.shape[1], y.shape[0])
    cdef long k = 0
    cdef int info = 0
    cdef double r
    cdef bint diverged = False

    _column_mean(particles, ws.mean)
    r = _residual(ws.mean, kappa, y)
    residuals[0] = r
    if k >= k0 and r <= threshold:
        return 0
    with nogil:
        while k < k_max:
            info = _step(particles, kappa, y, noise_var, dt, ws)
            if info != 0:
                break
            k += 1
            _column_mean(particles, ws.mean)
            r = _residual(ws.mean, kappa, y)
            if not isfinite(r):
                diverged = True
                break
            residuals[k] = r
            if k >= k0 and r <= threshold:
                break
    if info != 0:
        raise DivergenceError(f"gain system not positive definite at step {k + 1} (info={info})")
    if diverged:
        raise DivergenceError(f"non-finite ensemble after step {k + 1}; reduce dt")
    return k


def tridiag_solve(double[::1] lower, double[::1] diag, double[::1] upper, double[::1] rhs):
    cdef Py_ssize_t m = diag.shape[0], j
    cdef double[::1] c = np.empty(m)
    x_arr = np.empty(m)
    cdef double[::1] x = x_arr
    cdef double beta = diag[0]
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
    return x_arr
