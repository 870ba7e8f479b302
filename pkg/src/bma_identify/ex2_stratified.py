"""Average risk difference from data sampled within strata of ``C``.

``phi = (phi0, phi1)``: the (X, Y) cell probabilities given ``C = c``, cells
ordered (x, y) in {00, 01, 10, 11}.  ``lambda = Pr(C=1)`` is not identified.
Model 1 fixes ``lambda`` at a known value; model 2 imposes no interaction on
the risk-difference scale, ``v(phi0) = v(phi1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .core import (
    ExampleAdapter,
    LimitProfile,
    ModelWeights,
    RamseCell,
    RamseTable,
    ScenarioBatch,
    ramse_table,
)
from .errors import DegenerateStratumError
from .mc_stat import sample_dirichlet

EXAMPLE_ID = 2
EQUAL_TOL = 1e-12


@dataclass(frozen=True)
class Ex2Hyper:
    lambda_tilde: float = 0.15
    beta_a: float = 4.0
    beta_b: float = 18.0
    w: ModelWeights = field(default_factory=lambda: ModelWeights.equal(3))
    k: float = 1.0 / 3.0

    def __post_init__(self):
        if not isinstance(self.w, ModelWeights):
            object.__setattr__(self, "w", ModelWeights(self.w))
        if len(self.w) != 3:
            raise ValueError("Example 2 needs three model weights")
        if not 0.0 < self.lambda_tilde < 1.0:
            raise ValueError(f"lambda_tilde must lie in (0, 1), got {self.lambda_tilde}")
        if not (self.beta_a > 0 and self.beta_b > 0):
            raise ValueError("Beta prior parameters must be positive")
        if not self.k > 0:
            raise ValueError("k must be positive")

    @property
    def lambda_bar(self):
        return self.beta_a / (self.beta_a + self.beta_b)

    @property
    def sigma2_lambda(self):
        a, b = self.beta_a, self.beta_b
        return a * b / ((a + b) ** 2 * (a + b + 1))


@dataclass(frozen=True)
class Ex2Params:
    phi0: np.ndarray
    phi1: np.ndarray
    lam: float

    def __post_init__(self):
        for name in ("phi0", "phi1"):
            v = np.asarray(getattr(self, name), float)
            if v.shape != (4,) or np.any(v < 0) or abs(v.sum() - 1) > 1e-12:
                raise ValueError(f"{name} must be 4 cell probabilities")
            object.__setattr__(self, name, v)
        if not 0.0 < self.lam < 1.0:
            raise ValueError("lambda must lie in (0, 1)")

    @property
    def psi(self):
        return (1 - self.lam) * risk_difference(self.phi0) + self.lam * risk_difference(self.phi1)


def risk_difference(phi_c):
    """``Pr(Y=1|X=1) - Pr(Y=1|X=0)`` for one stratum's four cells."""
    p00, p01, p10, p11 = (float(x) for x in np.asarray(phi_c, float))
    if p10 + p11 <= 0 or p00 + p01 <= 0:
        raise DegenerateStratumError("degenerate stratum")
    return p11 / (p11 + p10) - p01 / (p01 + p00)


def risk_difference_batch(phi_c):
    phi_c = np.asarray(phi_c, float)
    x1 = phi_c[:, 2] + phi_c[:, 3]
    x0 = phi_c[:, 0] + phi_c[:, 1]
    if np.any(x1 <= 0) or np.any(x0 <= 0):
        raise DegenerateStratumError("degenerate stratum")
    return phi_c[:, 3] / x1 - phi_c[:, 1] / x0


def limit_profile(params, hyper, on_restriction=None):
    """Limiting weights and means.

    ``on_restriction`` carries exact knowledge that ``v(phi0) = v(phi1)``;
    when None the equality is tested to ``1e-12``.
    """
    v0, v1 = risk_difference(params.phi0), risk_difference(params.phi1)
    if on_restriction is None:
        on_restriction = abs(v1 - v0) <= EQUAL_TOL
    if on_restriction:
        return LimitProfile.assemble(ModelWeights([0.0, 0.0, 1.0]), (None, None, v0))
    w = hyper.w
    wstar = ModelWeights.normalized([w[0], w[1], 0.0])
    psi0 = v0 + (v1 - v0) * hyper.lambda_bar
    psi1 = v0 + (v1 - v0) * hyper.lambda_tilde
    return LimitProfile.assemble(wstar, (psi0, psi1, None))


def amse_cells(hyper):
    """Closed-form AMSE for the four (Nature, investigator) pairs."""
    k, s2 = hyper.k, hyper.sigma2_lambda
    w0, w1, _ = hyper.w
    gap2 = (hyper.lambda_tilde - hyper.lambda_bar) ** 2
    return {
        ("pi0", "pi0"): k * s2,
        ("pi0", "mix"): k * (s2 + (w1 / (w0 + w1)) ** 2 * gap2),
        ("mix", "pi0"): k * (w0 * s2 + w1 * gap2),
        ("mix", "mix"): k * (w0 * s2 + w0 * w1 / (w0 + w1) * gap2),
    }


def amse_table(hyper=None):
    hyper = Ex2Hyper() if hyper is None else hyper
    cells = {key: RamseCell(math.sqrt(v)) for key, v in amse_cells(hyper).items()}
    return RamseTable.from_cells(cells, label="ex2")


# --------------------------------------------------------------------------
# Monte Carlo cross-check


def _batch(phi0, phi1, lam, model, on_restriction=None):
    v0 = risk_difference_batch(phi0)
    if on_restriction is not None:
        psi = v0
    else:
        psi = (1 - lam) * v0 + lam * risk_difference_batch(phi1)
    return ScenarioBatch(np.stack([phi0, phi1], axis=1), lam, np.full(len(lam), model), psi, on_restriction)


def sampler(model, hyper):
    """Nature's batch sampler for model 0, 1 or 2."""
    ones = [1.0, 1.0, 1.0, 1.0]

    def draw0(rng, size):
        phi0 = sample_dirichlet(ones, rng, size=size)
        phi1 = sample_dirichlet(ones, rng, size=size)
        lam = rng.generator.beta(hyper.beta_a, hyper.beta_b, size=size)
        return _batch(phi0, phi1, lam, 0)

    def draw1(rng, size):
        phi0 = sample_dirichlet(ones, rng, size=size)
        phi1 = sample_dirichlet(ones, rng, size=size)
        return _batch(phi0, phi1, np.full(size, hyper.lambda_tilde), 1)

    def draw2(rng, size):
        # phi1 built on the constraint surface v(phi1) = v(phi0): Pr(X=1|C=1)
        # uniform, Pr(Y=1|X=0,C=1) uniform on its feasible range (equivalent
        # to redrawing a uniform until Pr(Y=1|X=1,C=1) lands in [0, 1])
        phi0 = sample_dirichlet(ones, rng, size=size)
        v = risk_difference_batch(phi0)
        px1 = rng.generator.uniform(size=size)
        lo = np.maximum(0.0, -v)
        hi = np.minimum(1.0, 1.0 - v)
        r0 = lo + (hi - lo) * rng.generator.uniform(size=size)
        r1 = r0 + v
        phi1 = np.column_stack([(1 - px1) * (1 - r0), (1 - px1) * r0, px1 * (1 - r1), px1 * r1])
        lam = rng.generator.beta(hyper.beta_a, hyper.beta_b, size=size)
        return _batch(phi0, phi1, lam, 2, on_restriction=np.ones(size, dtype=bool))

    return (draw0, draw1, draw2)[model]


def limits_batch(batch, hyper):
    """``(n, 3)`` limiting weights and ``(n, 3)`` limits (NaN where unused)."""
    v0 = risk_difference_batch(batch.phi[:, 0])
    v1 = risk_difference_batch(batch.phi[:, 1])
    n = len(batch)
    w = hyper.w
    on = batch.on_restriction
    ws = np.tile([w[0] / (w[0] + w[1]), w[1] / (w[0] + w[1]), 0.0], (n, 1))
    ws[on] = [0.0, 0.0, 1.0]
    psi = np.column_stack([v0 + (v1 - v0) * hyper.lambda_bar, v0 + (v1 - v0) * hyper.lambda_tilde, np.full(n, np.nan)])
    psi[on] = np.column_stack([np.full(on.sum(), np.nan), np.full(on.sum(), np.nan), v0[on]])
    return ws, psi


def adapter(hyper=None):
    hyper = Ex2Hyper() if hyper is None else hyper

    def inv_pi0(batch):
        v0 = risk_difference_batch(batch.phi[:, 0])
        v1 = risk_difference_batch(batch.phi[:, 1])
        return v0 + (v1 - v0) * hyper.lambda_bar

    def inv_mix(batch):
        ws, psi = limits_batch(batch, hyper)
        return np.where(ws > 0, ws * np.nan_to_num(psi), 0.0).sum(axis=1)

    return ExampleAdapter(
        example=EXAMPLE_ID,
        weights=hyper.w,
        samplers=tuple(sampler(j, hyper) for j in range(3)),
        investigators={"pi0": inv_pi0, "mix": inv_mix},
        label="ex2-mc",
    )


def mc_validate_ex2(hyper, cfg):
    """All four cells recomputed by Monte Carlo through the generic engine."""
    return ramse_table(adapter(hyper), cfg)
