"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is fixed at import time by ``BMA_IDENTIFY_NUMBA``.  Both paths
implement the same contracts; :func:`implementation` exposes either one
explicitly for benchmarks and cross-checks.

Ex4 cells are indexed ``4*c + 2*x + y``.  Root-scan status codes:
``NO_ROOT``, ``ONE_ROOT``, ``MULTI_ROOT``, ``INDETERMINATE`` (a non-finite
interaction value somewhere on the scan).
"""

import numpy as np

from . import _backend, _np_kernels

NO_ROOT, ONE_ROOT, MULTI_ROOT, INDETERMINATE = 0, 1, 2, 3

# interaction values this close to zero are rounding noise around an exact root
ZERO_TOL = 1e-14

NAMES = ("ex3_inv_cube", "ex4_rd_strata", "ex4_psi0", "ex4_scan")

BACKEND = "numba" if _backend.USE_NUMBA else "numpy"


def implementation(backend):
    """Module holding the kernels for ``backend`` ("numba" or "numpy")."""
    if backend == "numpy":
        return _np_kernels
    if backend == "numba":
        if not _backend.NUMBA_AVAILABLE:
            raise RuntimeError("numba is not installed")
        from . import _nb_kernels

        return _nb_kernels
    raise ValueError(f"unknown backend {backend!r}")


_impl = implementation(BACKEND)


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def ex3_inv_cube(b0, b1, x, w):
    """Integral of ``(l0 + l1 - 1)**-3`` over ``(b0, 1) x (b1, 1)``, per row."""
    return _impl.ex3_inv_cube(_f64(b0), _f64(b1), _f64(x), _f64(w))


def ex4_rd_strata(phi, lam):
    """``(n, 2)`` stratum risk differences after correcting ``phi`` at sensitivity ``lam``."""
    phi = np.atleast_2d(_f64(phi))
    lam = np.broadcast_to(_f64(lam), (phi.shape[0],)).copy()
    return _impl.ex4_rd_strata(phi, lam)


def ex4_psi0(phi, lo, x, w):
    """Average risk difference with sensitivity uniform on ``(lo, 1)``."""
    return _impl.ex4_psi0(np.atleast_2d(_f64(phi)), _f64(lo), _f64(x), _f64(w))


def ex4_scan(phi, lo, npts, tol, ztol=ZERO_TOL):
    """Roots of the correction's risk-difference interaction over ``[lo, 1]``.

    ``npts`` equal subintervals are scanned; a value within ``ztol`` of zero
    at a scan point counts as a root, as does a strict sign change between
    nonzero neighbours.  A single root is bisected to width ``tol``.
    Returns ``(status, root)`` arrays.
    """
    return _impl.ex4_scan(np.atleast_2d(_f64(phi)), _f64(lo), int(npts), float(tol), float(ztol))
