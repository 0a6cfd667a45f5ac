"""Reference (numpy) versions of the dense quadrature kernels.

Used when the compiled extension is unavailable or ``OPWLAB_PURE_PYTHON`` is set.
"""

import numpy as np


def _shift_kernel(eta, nu, x, dt, dnu):
    # K[i, j] = dt dnu sum_l eta[i, l] exp(2 pi i x_j nu_l)
    phase = np.exp(2j * np.pi * np.mod(np.outer(nu, x), 1.0))
    return (np.asarray(eta) @ phase) * (dt * dnu)


def dense_apply(eta, nu, x, f, shift0, dt, dnu):
    eta = np.asarray(eta, dtype=np.complex128)
    f = np.asarray(f, dtype=np.complex128)
    nx = len(x)
    K = _shift_kernel(eta, np.asarray(nu), np.asarray(x), dt, dnu)
    out = np.zeros(nx, dtype=np.complex128)
    for i in range(eta.shape[0]):
        s = shift0 + i
        lo, hi = max(0, s), min(nx, nx + s)
        if lo < hi:
            out[lo:hi] += K[i, lo:hi] * f[lo - s : hi - s]
    return out


def dense_apply_adjoint(eta, nu, x, g, shift0, dt, dnu):
    eta = np.asarray(eta, dtype=np.complex128)
    g = np.asarray(g, dtype=np.complex128)
    nx = len(x)
    K = _shift_kernel(eta, np.asarray(nu), np.asarray(x), dt, dnu)
    out = np.zeros(nx, dtype=np.complex128)
    for i in range(eta.shape[0]):
        s = shift0 + i
        lo, hi = max(0, s), min(nx, nx + s)
        if lo < hi:
            out[lo - s : hi - s] += np.conj(K[i, lo:hi]) * g[lo:hi]
    return out
