"""Pure-Python/numpy coordinate descent, numerically equivalent to the compiled kernel."""

import numpy as np


def _soft(z, g):
    if z > g:
        return z - g
    if z < -g:
        return z + g
    return 0.0


def lasso_cd(X, y, lam, beta, max_iter=1000, tol=1e-7):
    """Run sweeps until the largest coefficient change falls below ``tol``.

    ``beta`` is updated in place (warm start). Returns the number of sweeps.
    """
    n, p = X.shape
    sq = np.einsum("ij,ij->j", X, X) / n
    resid = y - X @ beta
    it = 0
    while it < max_iter:
        it += 1
        dmax = wmax = 0.0
        for j in range(p):
            if sq[j] == 0.0:
                continue
            col = X[:, j]
            old = beta[j]
            rho = float(col @ resid) / n + sq[j] * old
            new = _soft(rho, lam) / sq[j]
            delta = new - old
            if delta != 0.0:
                resid -= col * delta
                beta[j] = new
            dmax = max(dmax, abs(delta))
            wmax = max(wmax, abs(new))
        if dmax <= tol * max(wmax, 1.0):
            break
    return it
