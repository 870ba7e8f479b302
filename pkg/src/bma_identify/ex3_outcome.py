"""Risk difference under possibly nondifferential outcome misclassification.

``phi_x = Pr(Y*=1 | X=x)`` is identified; ``omega_x = Pr(Y=1 | X=x)`` and the
specificity/sensitivity pair ``lambda = (lambda0, lambda1)`` are not.
Model 0 puts uniform priors on ``omega`` and on ``lambda`` over
``(a0, 1) x (a1, 1)``; model 1 asserts perfect classification.  The target is
``omega1 - omega0 = (phi1 - phi0) / (lambda0 + lambda1 - 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from . import kernels
from .core import (
    PURPOSE_ENSEMBLE,
    ExampleAdapter,
    LimitProfile,
    McConfig,
    ModelWeights,
    ScenarioBatch,
    draw_scenarios,
    limiting_weights,
    limiting_weights_batch,
    ramse_table,
)
from .errors import SupportError
from .mc_stat import gauss_legendre

EXAMPLE_ID = 3
REFERENCE_DRAWS = 20_000
ENSEMBLE_DRAWS = 10_000


@dataclass(frozen=True)
class Ex3Hyper:
    a0: float = 0.85
    a1: float = 0.85
    w: ModelWeights = field(default_factory=lambda: ModelWeights.equal(2))

    def __post_init__(self):
        if not isinstance(self.w, ModelWeights):
            object.__setattr__(self, "w", ModelWeights(self.w))
        if len(self.w) != 2:
            raise ValueError("Example 3 needs two model weights")
        for name in ("a0", "a1"):
            v = getattr(self, name)
            if not 0.5 < v < 1.0:
                raise ValueError(f"{name} must lie in (0.5, 1), got {v}")

    @property
    def area(self):
        return (1.0 - self.a0) * (1.0 - self.a1)


@dataclass(frozen=True)
class Ex3Params:
    omega: tuple
    lam: tuple

    def __post_init__(self):
        om = tuple(float(x) for x in self.omega)
        la = tuple(float(x) for x in self.lam)
        if len(om) != 2 or len(la) != 2:
            raise ValueError("omega and lambda are pairs")
        if not all(0.0 < x < 1.0 for x in om):
            raise ValueError("omega must lie in (0, 1)^2")
        if not all(0.5 < x <= 1.0 for x in la):
            raise ValueError("lambda entries must lie in (0.5, 1]")
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "lam", la)

    @property
    def phi(self):
        l0, l1 = self.lam
        return tuple((1 - w) * (1 - l0) + w * l1 for w in self.omega)

    @property
    def psi(self):
        return self.omega[1] - self.omega[0]


def _check_phi(phi):
    phi = np.asarray(phi, float)
    if phi.shape[-1] != 2 or np.any(~(phi > 0.0)) or np.any(~(phi < 1.0)):
        raise SupportError("phi must lie in the open unit square")
    return phi


def support_corners(phi, hyper):
    """Lower corner ``(b0, b1)`` of the rectangle of ``lambda`` compatible with ``phi``."""
    phi = np.asarray(phi, float)
    p0, p1 = phi[..., 0], phi[..., 1]
    b0 = np.maximum(hyper.a0, np.maximum(1.0 - p0, 1.0 - p1))
    b1 = np.maximum(hyper.a1, np.maximum(p0, p1))
    return b0, b1


def _bracket(b0, b1):
    # log b0 + log b1 - log(b0 + b1 - 1), written in terms of the gaps to 1
    u0, u1 = 1.0 - b0, 1.0 - b1
    return np.log1p(-u0) + np.log1p(-u1) - np.log1p(-u0 - u1)


def marginal_phi_density_batch(phi, hyper):
    phi = _check_phi(phi)
    b0, b1 = support_corners(phi, hyper)
    return _bracket(b0, b1) / hyper.area


def marginal_phi_density(phi, hyper):
    """Model-0 marginal prior density of ``phi``; flat on a central square."""
    return float(marginal_phi_density_batch(np.asarray(phi, float)[None, :], hyper)[0])


def joint_density(phi, lam, hyper):
    """Model-0 joint prior density of ``(phi, lambda)``; zero off the support."""
    p0, p1 = phi
    l0, l1 = lam
    if not (hyper.a0 < l0 < 1.0 and hyper.a1 < l1 < 1.0):
        return 0.0
    if not all(1.0 - l0 < p < l1 for p in (p0, p1)):
        return 0.0
    return 1.0 / (hyper.area * (l0 + l1 - 1.0) ** 2)


def tabletop_bound(hyper):
    """Smallest possible ratio of limiting to prior odds for model 1 over model 0."""
    a0, a1 = hyper.a0, hyper.a1
    return hyper.area / math.log(a0 * a1 / (a0 + a1 - 1.0))


def min_wstar1(hyper):
    c = hyper.w[1] * tabletop_bound(hyper)
    return c / (hyper.w[0] + c)


def mean_inverse_gap(b0, b1, nodes=64):
    """``E[1/(lambda0 + lambda1 - 1)]`` when ``lambda`` has density proportional
    to ``(lambda0 + lambda1 - 1)**-2`` on ``(b0, 1) x (b1, 1)``."""
    b0 = np.atleast_1d(np.asarray(b0, float))
    b1 = np.atleast_1d(np.asarray(b1, float))
    x, w = gauss_legendre(nodes)
    return kernels.ex3_inv_cube(b0, b1, x, w) / _bracket(b0, b1)


def limits_batch(phi, hyper, nodes=64):
    """``wstar1`` and limits ``(psi0, psi1, psi_mix)`` for an ``(n, 2)`` array."""
    phi = _check_phi(phi)
    b0, b1 = support_corners(phi, hyper)
    dens0 = _bracket(b0, b1) / hyper.area
    ws = limiting_weights_batch(hyper.w, np.column_stack([dens0, np.ones_like(dens0)]))
    diff = phi[:, 1] - phi[:, 0]
    psi0 = diff * mean_inverse_gap(b0, b1, nodes)
    return ws[:, 1], psi0, diff, ws[:, 0] * psi0 + ws[:, 1] * diff


def limit_profile(phi_dagger, hyper, cfg=None):
    cfg = McConfig() if cfg is None else cfg
    phi = _check_phi(np.asarray(phi_dagger, float)[None, :])
    b0, b1 = support_corners(phi, hyper)
    wstar = limiting_weights(hyper.w, [float(_bracket(b0, b1)[0]) / hyper.area, 1.0])
    diff = float(phi[0, 1] - phi[0, 0])
    psi0 = diff * float(mean_inverse_gap(b0, b1, cfg.quad_nodes)[0])
    return LimitProfile.assemble(wstar, (psi0, diff))


# --------------------------------------------------------------------------
# priors


def sample_prior_batch(model, hyper, rng, size):
    g = rng.generator
    omega = g.uniform(size=(size, 2))
    if model == 0:
        lam = np.column_stack([g.uniform(hyper.a0, 1.0, size=size), g.uniform(hyper.a1, 1.0, size=size)])
        phi = (1.0 - omega) * (1.0 - lam[:, :1]) + omega * lam[:, 1:]
    elif model == 1:
        lam = np.ones((size, 2))
        phi = omega
    else:
        raise ValueError(f"model index must be 0 or 1, got {model}")
    return ScenarioBatch(phi, lam, np.full(size, model), omega[:, 1] - omega[:, 0])


def sample_prior(model, hyper, rng):
    """One draw from model ``model``'s prior as a :class:`ScenarioDraw`."""
    return sample_prior_batch(model, hyper, rng, 1)[0]


def adapter(hyper=None, cfg=None):
    hyper = Ex3Hyper() if hyper is None else hyper
    nodes = (McConfig() if cfg is None else cfg).quad_nodes

    def inv_pi0(batch):
        phi = batch.phi
        b0, b1 = support_corners(phi, hyper)
        return (phi[:, 1] - phi[:, 0]) * mean_inverse_gap(b0, b1, nodes)

    def inv_mix(batch):
        return limits_batch(batch.phi, hyper, nodes)[3]

    return ExampleAdapter(
        example=EXAMPLE_ID,
        weights=hyper.w,
        samplers=tuple(lambda rng, n, j=j: sample_prior_batch(j, hyper, rng, n) for j in range(2)),
        investigators={"pi0": inv_pi0, "mix": inv_mix},
        label="ex3",
    )


def ramse_table_ex3(hyper, cfg):
    return ramse_table(adapter(hyper, cfg), cfg)


def ensembles_wstar(hyper, cfg, n=ENSEMBLE_DRAWS):
    """``w*_1`` over ``n`` scenarios drawn from each model's prior, as two arrays."""
    out = []
    for j in range(2):
        batch = draw_scenarios(
            lambda rng, size, j=j: sample_prior_batch(j, hyper, rng, size),
            n, cfg, example=EXAMPLE_ID, purpose=PURPOSE_ENSEMBLE, model=j,
        )
        out.append(limits_batch(batch.phi, hyper, cfg.quad_nodes)[0])
    return out[0], out[1]


def histogram(values, bins=40, lo=None, hi=1.0):
    """Counts of ``values`` on ``bins`` equal bins from ``lo`` (default: the smallest value) to ``hi``."""
    values = np.asarray(values, float)
    lo = float(values.min()) if lo is None else lo
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return edges, counts
