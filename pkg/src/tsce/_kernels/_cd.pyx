# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled coordinate descent for the L1-penalised least-squares problem.

Minimises ``(1 / 2n) * ||y - X b||^2 + lam * ||b||_1`` one coordinate at a
time, keeping the residual up to date.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


cdef inline double _soft(double z, double g) nogil:
    if z > g:
        return z - g
    if z < -g:
        return z + g
    return 0.0


def lasso_cd(double[::1, :] X, double[::1] y, double lam, double[::1] beta,
             int max_iter=1000, double tol=1e-7):
    """Run sweeps until the largest coefficient change falls below ``tol``.

    ``beta`` is updated in place (warm start). Returns the number of sweeps.
    """
    cdef Py_ssize_t n = X.shape[0], p = X.shape[1]
    cdef Py_ssize_t i, j
    cdef int it = 0
    cdef double rho, old, new, delta, dmax, wmax
    cdef double[::1] resid = np.empty(n)
    cdef double[::1] sq = np.empty(p)

    for i in range(n):
        resid[i] = y[i]
    for j in range(p):
        sq[j] = 0.0
        for i in range(n):
            sq[j] += X[i, j] * X[i, j]
        sq[j] /= n
        if beta[j] != 0.0:
            for i in range(n):
                resid[i] -= X[i, j] * beta[j]

    with nogil:
        while it < max_iter:
            it += 1
            dmax = 0.0
            wmax = 0.0
            for j in range(p):
                if sq[j] == 0.0:
                    continue
                old = beta[j]
                rho = 0.0
                for i in range(n):
                    rho += X[i, j] * resid[i]
                rho = rho / n + sq[j] * old
                new = _soft(rho, lam) / sq[j]
                delta = new - old
                if delta != 0.0:
                    for i in range(n):
                        resid[i] -= X[i, j] * delta
                    beta[j] = new
                if fabs(delta) > dmax:
                    dmax = fabs(delta)
                if fabs(new) > wmax:
                    wmax = fabs(new)
            if dmax <= tol * (wmax if wmax > 1.0 else 1.0):
                break
    return it
