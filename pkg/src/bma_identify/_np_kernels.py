"""Vectorized numpy kernels; same contracts as :mod:`._nb_kernels`."""

import numpy as np

NO_ROOT, ONE_ROOT, MULTI_ROOT, INDETERMINATE = 0, 1, 2, 3

_CHUNK = 256


def ex3_inv_cube(b0, b1, x, w):
    out = np.empty(b0.shape[0])
    ww = w[:, None] * w[None, :]
    for s in range(0, b0.shape[0], _CHUNK):
        c0, c1 = b0[s:s + _CHUNK], b1[s:s + _CHUNK]
        h0 = 0.5 * (1.0 - c0)
        h1 = 0.5 * (1.0 - c1)
        l0 = c0[:, None] + h0[:, None] * (x + 1.0)
        l1 = c1[:, None] + h1[:, None] * (x + 1.0)
        d = l0[:, :, None] + l1[:, None, :] - 1.0
        out[s:s + _CHUNK] = (ww / (d * d * d)).sum(axis=(1, 2)) * h0 * h1
    return out


def _rd_grid(phi, lam):
    """Stratum risk differences of the corrected cells; ``lam`` is (n, m)."""
    kap = (1.0 - lam) / lam
    out = np.empty(lam.shape + (2,))
    for c in range(2):
        b = 4 * c
        e0 = phi[:, b + 2, None]
        e1 = phi[:, b + 3, None]
        s1 = e0 + e1
        d = phi[:, b, None] + phi[:, b + 1, None] - kap * s1
        with np.errstate(divide="ignore", invalid="ignore"):
            out[..., c] = e1 / s1 - (phi[:, b + 1, None] - kap * e1) / d
        bad = (s1 <= 0.0) | (d <= 0.0)
        out[..., c][bad] = np.nan
    deg = np.isnan(out).any(axis=-1)
    out[deg] = np.nan
    return out


def ex4_rd_strata(phi, lam):
    return _rd_grid(phi, lam[:, None])[:, 0, :]


def ex4_psi0(phi, lo, x, w):
    half = 0.5 * (1.0 - lo)
    lam = lo[:, None] + half[:, None] * (x + 1.0)
    rd = _rd_grid(phi, lam)
    pc0 = phi[:, 0:4].sum(axis=1)
    pc1 = phi[:, 4:8].sum(axis=1)
    avg = pc0[:, None] * rd[..., 0] + pc1[:, None] * rd[..., 1]
    return (0.5 * w * avg).sum(axis=1)


def _interaction(phi, lam):
    rd = _rd_grid(phi, lam)
    return rd[..., 1] - rd[..., 0]


def ex4_scan(phi, lo, npts, tol, ztol):
    n = phi.shape[0]
    status = np.zeros(n, np.int8)
    root = np.full(n, np.nan)
    for s in range(0, n, _CHUNK * 4):
        sl = slice(s, s + _CHUNK * 4)
        st, rt = _scan_chunk(phi[sl], lo[sl], npts, tol, ztol)
        status[sl] = st
        root[sl] = rt
    return status, root


def _scan_chunk(phi, lo, npts, tol, ztol):
    n = phi.shape[0]
    k = np.arange(npts + 1) / npts
    xs = lo[:, None] + (1.0 - lo)[:, None] * k[None, :]
    xs[:, -1] = 1.0
    f = _interaction(phi, xs)
    finite = np.isfinite(f)
    indet = ~finite.all(axis=1)
    f = np.where(finite, f, 1.0)
    zero = np.abs(f) <= ztol
    neg = f < 0.0
    change = (~zero[:, :-1]) & (~zero[:, 1:]) & (neg[:, :-1] != neg[:, 1:])
    count = zero.sum(axis=1) + change.sum(axis=1)

    status = np.where(count == 0, NO_ROOT, np.where(count == 1, ONE_ROOT, MULTI_ROOT)).astype(np.int8)
    status[indet] = INDETERMINATE
    root = np.full(n, np.nan)

    one = status == ONE_ROOT
    exact_rows = one & zero.any(axis=1)
    if exact_rows.any():
        idx = np.argmax(zero[exact_rows], axis=1)
        root[exact_rows] = xs[exact_rows, idx]
    br = np.flatnonzero(one & ~zero.any(axis=1))
    if br.size:
        j = np.argmax(change[br], axis=1)
        a = xs[br, j].copy()
        b = xs[br, j + 1].copy()
        fa = f[br, j].copy()
        sub = phi[br]
        active = np.ones(br.size, dtype=bool)
        result = np.full(br.size, np.nan)
        for _ in range(200):
            active &= (b - a) > tol
            if not active.any():
                break
            ia = np.flatnonzero(active)
            m = 0.5 * (a[ia] + b[ia])
            fm = _interaction(sub[ia], m[:, None])[:, 0]
            bad = ~np.isfinite(fm)
            if bad.any():
                status[br[ia[bad]]] = INDETERMINATE
                active[ia[bad]] = False
            hit = (np.abs(fm) <= ztol) & ~bad
            result[ia[hit]] = m[hit]
            active[ia[hit]] = False
            left = (~hit) & (~bad) & ((fm < 0.0) == (fa[ia] < 0.0))
            right = (~hit) & (~bad) & ~left
            a[ia[left]] = m[left]
            fa[ia[left]] = fm[left]
            b[ia[right]] = m[right]
        pending = np.isnan(result) & (status[br] == ONE_ROOT)
        result[pending] = 0.5 * (a[pending] + b[pending])
        root[br] = np.where(status[br] == ONE_ROOT, result, np.nan)
    return status, root
