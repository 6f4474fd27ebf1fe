"""Hot loops with a compiled backend and a pure-Python fallback.

The compiled module is used when it was built and ``TSCE_PURE_PYTHON`` is
unset or ``0``.
"""

import os

import numpy as np

from . import _cd_py

BACKEND = "python"
_impl = _cd_py

if os.environ.get("TSCE_PURE_PYTHON", "0") in ("", "0"):
    try:
        from . import _cd as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def _pick(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _cd_py
    if backend == "cython" and BACKEND == "cython":
        return _impl
    raise RuntimeError(f"backend {backend!r} is not available")


def lasso_cd(X, y, lam, beta=None, max_iter=1000, tol=1e-7, backend=None):
    """Coordinate descent for one penalty value; returns ``(beta, sweeps)``."""
    impl = _pick(backend)
    X = np.asfortranarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    beta = np.zeros(X.shape[1]) if beta is None else np.array(beta, dtype=np.float64)
    it = impl.lasso_cd(X, y, float(lam), beta, int(max_iter), float(tol))
    return beta, it


def lasso_path(X, y, lams, max_iter=1000, tol=1e-7, backend=None):
    """Warm-started solutions for a decreasing sequence of penalties, shape ``(len(lams), p)``."""
    X = np.asfortranarray(X, dtype=np.float64)
    out = np.zeros((len(lams), X.shape[1]))
    beta = np.zeros(X.shape[1])
    for k, lam in enumerate(lams):
        beta, _ = lasso_cd(X, y, lam, beta, max_iter, tol, backend)
        out[k] = beta
    return out
