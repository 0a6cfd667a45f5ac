# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled quadrature kernels for dense spreading-function operators.

Both routines evaluate

    (H f)(x_j) = dt dnu sum_i sum_l eta[i, l] exp(2 pi i x_j nu_l) f(x_j - t_i)

with ``t_i = (shift0 + i) dx`` and zero fill outside the input grid, or the
adjoint of that map. See ``_kernels_py`` for the reference version.

The sum over ``l`` is a matrix product ``K = eta @ P`` with the phase table
``P[l, j] = exp(2 pi i x_j nu_l)``; it goes to BLAS ``zgemm``. The phase
table and the shifted accumulation over ``i`` run as plain C loops.
"""

import numpy as np

from libc.math cimport cos, sin, fmod, M_PI
from scipy.linalg.cython_blas cimport zgemm


cdef void _phase_table(const double[::1] nu, const double[::1] x,
                       double complex[:, ::1] P) noexcept nogil:
    cdef Py_ssize_t l, j
    cdef double a
    for l in range(nu.shape[0]):
        for j in range(x.shape[0]):
            a = 2.0 * M_PI * fmod(x[j] * nu[l], 1.0)
            P[l, j] = cos(a) + 1j * sin(a)


cdef double complex[:, ::1] _shift_kernel(const double complex[:, ::1] eta,
                                          const double[::1] nu, const double[::1] x,
                                          double scale):
    """``K[i, j] = scale * sum_l eta[i, l] P[l, j]``, row-major ``(nt, nx)``."""
    cdef int nt = <int>eta.shape[0], nv = <int>eta.shape[1], nx = <int>x.shape[0]
    cdef double complex[:, ::1] P = np.empty((nv, nx), dtype=np.complex128)
    cdef double complex[:, ::1] K = np.empty((nt, nx), dtype=np.complex128)
    cdef double complex alpha = scale, beta = 0
    cdef char trans = b"N"
    with nogil:
        _phase_table(nu, x, P)
        # row-major K = eta @ P is column-major K^T = P^T @ eta^T
        zgemm(&trans, &trans, &nx, &nt, &nv, &alpha, &P[0, 0], &nx,
              <double complex*>&eta[0, 0], &nv, &beta, &K[0, 0], &nx)
    return K


def dense_apply(const double complex[:, ::1] eta, const double[::1] nu,
                const double[::1] x, const double complex[::1] f,
                long shift0, double dt, double dnu):
    cdef Py_ssize_t nt = eta.shape[0], nx = x.shape[0]
    cdef Py_ssize_t i, j, s, lo, hi
    cdef double complex[:, ::1] K = _shift_kernel(eta, nu, x, dt * dnu)
    out = np.zeros(nx, dtype=np.complex128)
    cdef double complex[::1] o = out
    with nogil:
        for i in range(nt):
            s = shift0 + i
            lo = s if s > 0 else 0
            hi = nx + s if s < 0 else nx
            for j in range(lo, hi):
                o[j] = o[j] + K[i, j] * f[j - s]
    return out


def dense_apply_adjoint(const double complex[:, ::1] eta, const double[::1] nu,
                        const double[::1] x, const double complex[::1] g,
                        long shift0, double dt, double dnu):
    cdef Py_ssize_t nt = eta.shape[0], nx = x.shape[0]
    cdef Py_ssize_t i, j, s, lo, hi
    cdef double complex[:, ::1] K = _shift_kernel(eta, nu, x, dt * dnu)
    out = np.zeros(nx, dtype=np.complex128)
    cdef double complex[::1] o = out
    with nogil:
        for i in range(nt):
            s = shift0 + i
            lo = s if s > 0 else 0
            hi = nx + s if s < 0 else nx
            for j in range(lo, hi):
                o[j - s] = o[j - s] + K[i, j].conjugate() * g[j]
    return out
