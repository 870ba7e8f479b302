"""Seeded sampling primitives and fixed-order numerical kernels.

Random streams are counter-based: a :class:`RngStream` keys a Philox
generator with ``(seed, stream_id)``, so any stream can be rebuilt
independently of every other stream and of the order in which streams are
consumed.  Monte Carlo loops derive one stream per block of draws with
:func:`stream_id`.
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from .errors import ConfigError, QuadratureError, RootFindingError

_U64 = (1 << 64) - 1

# stream_id bit layout: example(8) | purpose(8) | model(8) | block(40)
_BLOCK_BITS = 40


def stream_id(example, purpose, model, block):
    """Pack a stream identifier from small integer tags and a block counter."""
    for name, v in (("example", example), ("purpose", purpose), ("model", model)):
        if not 0 <= v < 256:
            raise ValueError(f"{name} tag must be in [0, 256), got {v}")
    if not 0 <= block < (1 << _BLOCK_BITS):
        raise ValueError(f"block index out of range: {block}")
    return (example << 56) | (purpose << 48) | (model << 40) | block


class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Two streams with the same pair produce the same sequence for the same
    call sequence.  A stream is stateful once used and must not be shared
    between threads.
    """

    __slots__ = ("seed", "stream_id", "_gen")

    def __init__(self, seed, stream_id=0):
        if not (0 <= int(seed) <= _U64 and 0 <= int(stream_id) <= _U64):
            raise ValueError("seed and stream_id must be 64-bit unsigned integers")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._gen = None

    @property
    def generator(self):
        if self._gen is None:
            key = self.seed | (self.stream_id << 64)
            self._gen = np.random.Generator(np.random.Philox(key=key))
        return self._gen

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id:#x})"


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or not self.lo < self.hi:
            raise ValueError(f"invalid interval ({self.lo}, {self.hi})")

    @property
    def width(self):
        return self.hi - self.lo


# --------------------------------------------------------------------------
# sampling


def sample_dirichlet(alphas, rng, size=None):
    """Dirichlet draw(s) from normalized independent gamma variates.

    Returns a :class:`~bma_identify.core.Simplex` when ``size`` is None,
    otherwise an ``(size, d)`` array whose rows sum to one.
    """
    alphas = np.asarray(alphas, dtype=float)
    if alphas.ndim != 1 or alphas.size < 2:
        raise ValueError("alphas must be a 1-d sequence of length >= 2")
    if not np.all(alphas > 0):
        raise ValueError(f"Dirichlet parameters must be positive, got {alphas.tolist()}")
    n = 1 if size is None else int(size)
    g = rng.generator.standard_gamma(alphas, size=(n, alphas.size))
    p = g / g.sum(axis=1, keepdims=True)
    if size is None:
        from .core import Simplex

        return Simplex(p[0])
    return p


def sample_uniform(iv, rng, size=None):
    return rng.generator.uniform(iv.lo, iv.hi, size=size)


def sample_beta(a, b, rng, size=None):
    if not (a > 0 and b > 0):
        raise ValueError(f"Beta parameters must be positive, got ({a}, {b})")
    return rng.generator.beta(a, b, size=size)


# --------------------------------------------------------------------------
# quadrature


@lru_cache(maxsize=32)
def _legendre(nodes):
    x, w = np.polynomial.legendre.leggauss(nodes)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(nodes, iv=None):
    """Gauss-Legendre nodes and weights, on [-1, 1] or mapped onto ``iv``."""
    if int(nodes) < 1:
        raise ConfigError(f"quadrature order must be positive, got {nodes}")
    x, w = _legendre(int(nodes))
    if iv is None:
        return x, w
    half = 0.5 * (iv.hi - iv.lo)
    return iv.lo + half * (x + 1.0), half * w


def quad_1d(f, iv, nodes=64):
    """Fixed-order Gauss-Legendre approximation of the integral of ``f`` over ``iv``."""
    x, w = gauss_legendre(nodes, iv)
    vals = np.array([f(float(xi)) for xi in x], dtype=float)
    if not np.all(np.isfinite(vals)):
        bad = float(x[~np.isfinite(vals)][0])
        raise QuadratureError(f"integrand not finite at node x={bad!r}")
    return float(np.dot(w, vals))


# --------------------------------------------------------------------------
# root finding

ROOT = "root"
NO_ROOT = "no root"
MULTIPLE_ROOTS = "multiple roots"


@dataclass(frozen=True)
class RootResult:
    status: str
    root: float | None = None
    n_roots: int = 0

    @property
    def found(self):
        return self.status == ROOT


def _bisect(f, a, b, fa, tol, max_iter=200):
    for _ in range(max_iter):
        if b - a <= tol:
            break
        m = 0.5 * (a + b)
        fm = f(m)
        if not math.isfinite(fm):
            raise RootFindingError(f"non-finite function value at x={m!r}")
        if fm == 0.0:
            return m
        if (fm < 0.0) == (fa < 0.0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def find_root(f, iv, cfg):
    """Scan ``cfg.root_scan_points`` equal subintervals of ``iv`` for roots.

    An exact zero at a scan point or a strict sign change across a
    subinterval each count as one root.  A single root is refined by
    bisection to width ``cfg.root_tol``.
    """
    npts = int(cfg.root_scan_points)
    xs = [iv.lo + iv.width * (k / npts) for k in range(npts + 1)]
    count = 0
    exact = None
    bracket = None
    f_prev = None
    for k, x in enumerate(xs):
        fx = f(x)
        if not math.isfinite(fx):
            raise RootFindingError(f"non-finite function value at x={x!r}")
        if fx == 0.0:
            count += 1
            exact = x
        elif f_prev is not None and f_prev != 0.0 and (fx < 0.0) != (f_prev < 0.0):
            count += 1
            bracket = (xs[k - 1], x, f_prev)
        f_prev = fx
    if count == 0:
        return RootResult(NO_ROOT)
    if count > 1:
        return RootResult(MULTIPLE_ROOTS, n_roots=count)
    if exact is not None:
        return RootResult(ROOT, exact, 1)
    a, b, fa = bracket
    return RootResult(ROOT, _bisect(f, a, b, fa, cfg.root_tol), 1)
