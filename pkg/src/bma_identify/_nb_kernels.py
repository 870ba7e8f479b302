"""Numba-compiled loop kernels. Imported only when numba is enabled."""

import numpy as np
from numba import njit

# status codes shared with the numpy kernels
NO_ROOT, ONE_ROOT, MULTI_ROOT, INDETERMINATE = 0, 1, 2, 3

_opts = dict(cache=True, nogil=True)


@njit(**_opts)
def ex3_inv_cube(b0, b1, x, w):
    n = b0.shape[0]
    m = x.shape[0]
    out = np.empty(n)
    for i in range(n):
        h0 = 0.5 * (1.0 - b0[i])
        h1 = 0.5 * (1.0 - b1[i])
        total = 0.0
        for j in range(m):
            l0 = b0[i] + h0 * (x[j] + 1.0)
            inner = 0.0
            for k in range(m):
                d = l0 + b1[i] + h1 * (x[k] + 1.0) - 1.0
                inner += w[k] / (d * d * d)
            total += w[j] * inner
        out[i] = total * h0 * h1
    return out


@njit(**_opts)
def _rd_stratum(phi, base, kap):
    e1 = phi[base + 3]
    s1 = phi[base + 2] + e1
    d = phi[base] + phi[base + 1] - kap * s1
    if s1 <= 0.0 or d <= 0.0:
        return np.nan
    return e1 / s1 - (phi[base + 1] - kap * e1) / d


@njit(**_opts)
def _rd_pair(phi, lam):
    kap = (1.0 - lam) / lam
    r0 = _rd_stratum(phi, 0, kap)
    r1 = _rd_stratum(phi, 4, kap)
    if np.isnan(r0) or np.isnan(r1):
        return np.nan, np.nan
    return r0, r1


@njit(**_opts)
def _interaction(phi, lam):
    r0, r1 = _rd_pair(phi, lam)
    return r1 - r0


@njit(**_opts)
def ex4_rd_strata(phi, lam):
    n = phi.shape[0]
    out = np.empty((n, 2))
    for i in range(n):
        out[i, 0], out[i, 1] = _rd_pair(phi[i], lam[i])
    return out


@njit(**_opts)
def ex4_psi0(phi, lo, x, w):
    n = phi.shape[0]
    m = x.shape[0]
    out = np.empty(n)
    for i in range(n):
        p = phi[i]
        pc0 = p[0] + p[1] + p[2] + p[3]
        pc1 = p[4] + p[5] + p[6] + p[7]
        half = 0.5 * (1.0 - lo[i])
        total = 0.0
        for j in range(m):
            r0, r1 = _rd_pair(p, lo[i] + half * (x[j] + 1.0))
            total += 0.5 * w[j] * (pc0 * r0 + pc1 * r1)
        out[i] = total
    return out


@njit(**_opts)
def ex4_scan(phi, lo, npts, tol, ztol):
    n = phi.shape[0]
    status = np.zeros(n, np.int8)
    root = np.full(n, np.nan)
    for i in range(n):
        p = phi[i]
        a0 = lo[i]
        width = 1.0 - a0
        count = 0
        has_exact = False
        exact = 0.0
        xa = 0.0
        xb = 0.0
        fa = 0.0
        f_prev = 0.0
        x_prev = a0
        indet = False
        for k in range(npts + 1):
            xk = 1.0 if k == npts else a0 + width * (k / npts)
            fx = _interaction(p, xk)
            if not np.isfinite(fx):
                indet = True
                break
            if abs(fx) <= ztol:
                fx = 0.0
                count += 1
                has_exact = True
                exact = xk
            elif k > 0 and f_prev != 0.0 and (fx < 0.0) != (f_prev < 0.0):
                count += 1
                xa = x_prev
                xb = xk
                fa = f_prev
            f_prev = fx
            x_prev = xk
        if indet:
            status[i] = INDETERMINATE
            continue
        if count == 0:
            status[i] = NO_ROOT
            continue
        if count > 1:
            status[i] = MULTI_ROOT
            continue
        status[i] = ONE_ROOT
        if has_exact:
            root[i] = exact
            continue
        done = False
        for _ in range(200):
            if xb - xa <= tol:
                break
            xm = 0.5 * (xa + xb)
            fm = _interaction(p, xm)
            if not np.isfinite(fm):
                status[i] = INDETERMINATE
                done = True
                break
            if abs(fm) <= ztol:
                root[i] = xm
                done = True
                break
            if (fm < 0.0) == (fa < 0.0):
                xa = xm
                fa = fm
            else:
                xb = xm
        if not done:
            root[i] = 0.5 * (xa + xb)
    return status, root
