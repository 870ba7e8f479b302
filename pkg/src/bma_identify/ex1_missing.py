"""Prevalence estimation when missingness may be nonignorable.

Cells ``p = (p00, p01, p10, p11)`` with ``p_ry = Pr(R=r, Y=y)``; ``R=0``
means the test result is missing.  Model 0 (NIM) puts Dirichlet(1,1,1,1) on
``p``; model 1 (MAR) makes ``R`` and ``Y`` independent with uniform
marginals.  The identified parameter is ``(p0+, p10, p11)`` and the
non-identified one is ``s = p01 / p0+``; the target is ``psi = Pr(Y=1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy import stats

from .core import (
    PURPOSE_FIGURE,
    ExampleAdapter,
    LimitProfile,
    ModelWeights,
    RamseTable,
    ScenarioBatch,
    Simplex,
    limiting_weights,
    limiting_weights_batch,
    ramse_table,
)
from .mc_stat import RngStream, sample_dirichlet, stream_id

EXAMPLE_ID = 1
REFERENCE_DRAWS = 100_000

NIM, MAR = 0, 1


@dataclass(frozen=True)
class Ex1Counts:
    c10: int
    c11: int
    c0plus: int

    def __post_init__(self):
        if min(self.c10, self.c11, self.c0plus) < 0:
            raise ValueError("counts must be nonnegative")

    @property
    def n(self):
        return self.c10 + self.c11 + self.c0plus


STUDY_COUNTS = Ex1Counts(c10=699, c11=52, c0plus=36)


@dataclass(frozen=True)
class Ex1Params:
    p: Simplex

    @classmethod
    def from_cells(cls, p00, p01, p10, p11):
        return cls(Simplex([p00, p01, p10, p11]))

    @property
    def p0plus(self):
        return self.p[0] + self.p[1]

    @property
    def p1plus(self):
        return self.p[2] + self.p[3]

    @property
    def s(self):
        if not self.p0plus > 0:
            raise ValueError("s undefined when p0+ = 0")
        return self.p[1] / self.p0plus

    @property
    def psi(self):
        return self.p[1] + self.p[3]


def bayes_factor(counts):
    """Bayes factor of MAR against NIM for the observed counts."""
    n, c0 = counts.n, counts.c0plus
    return (n + 2) * (n + 3) / (6 * (c0 + 1) * (n - c0 + 1))


def posterior_weights(counts, w):
    """Posterior model weights ordered (NIM, MAR)."""
    w = w if isinstance(w, ModelWeights) else ModelWeights(w)
    b = bayes_factor(counts)
    if w[MAR] == 0.0:
        return ModelWeights([1.0, 0.0])
    odds = w[MAR] * b
    return ModelWeights([w[NIM] / (w[NIM] + odds), odds / (w[NIM] + odds)])


def posterior_means(counts):
    """Posterior means of ``psi`` under (NIM, MAR)."""
    n = counts.n
    nim = 0.5 * (2 + counts.c0plus) / (n + 4) + (1 + counts.c11) / (n + 4)
    mar = (1 + counts.c11) / (2 + counts.c11 + counts.c10)
    return nim, mar


@dataclass(frozen=True)
class FinitePosterior:
    weights: ModelWeights
    mean_nim: float
    mean_mar: float
    mean_bma: float
    draws_nim: np.ndarray
    draws_mar: np.ndarray

    def density_curves(self, grid=None, n_grid=400):
        """Kernel density estimates (Silverman bandwidth) on a fixed grid."""
        if grid is None:
            both = np.concatenate([self.draws_nim, self.draws_mar])
            lo, hi = np.quantile(both, [0.0005, 0.9995])
            pad = 0.1 * (hi - lo)
            grid = np.linspace(max(lo - pad, 0.0), min(hi + pad, 1.0), n_grid)
        d_nim = stats.gaussian_kde(self.draws_nim, bw_method="silverman")(grid)
        d_mar = stats.gaussian_kde(self.draws_mar, bw_method="silverman")(grid)
        d_bma = self.weights[NIM] * d_nim + self.weights[MAR] * d_mar
        return grid, d_nim, d_mar, d_bma


def finite_posterior(counts, w, cfg):
    """Finite-sample posterior of ``psi`` under NIM, MAR and their average.

    The NIM posterior is ``(p0+, p10, p11) ~ Dirichlet(2+c0+, 1+c10, 1+c11)``
    with ``s ~ Unif(0, 1)`` independently; the MAR posterior of ``psi`` is
    ``Beta(1+c11, 1+c10)``.
    """
    w = w if isinstance(w, ModelWeights) else ModelWeights(w)
    post_w = posterior_weights(counts, w)
    m_nim, m_mar = posterior_means(counts)
    n = cfg.draws_per_prior
    rng = RngStream(cfg.seed, stream_id(EXAMPLE_ID, PURPOSE_FIGURE, 0, 0))
    cells = sample_dirichlet([2 + counts.c0plus, 1 + counts.c10, 1 + counts.c11], rng, size=n)
    s = rng.generator.uniform(size=n)
    draws_nim = s * cells[:, 0] + cells[:, 2]
    rng_mar = RngStream(cfg.seed, stream_id(EXAMPLE_ID, PURPOSE_FIGURE, 1, 0))
    draws_mar = rng_mar.generator.beta(1 + counts.c11, 1 + counts.c10, size=n)
    mean_bma = post_w[NIM] * m_nim + post_w[MAR] * m_mar
    return FinitePosterior(post_w, m_nim, m_mar, mean_bma, draws_nim, draws_mar)


# --------------------------------------------------------------------------
# large-sample limits


def marginal_densities(p0plus):
    """Marginal prior densities of ``(p0+, p11)`` under (NIM, MAR)."""
    return 6.0 * p0plus, 1.0 / (1.0 - p0plus)


def limit_profile(params, w):
    p0, p1 = params.p0plus, params.p1plus
    if not 0.0 < p0 < 1.0:
        raise ValueError(f"limits need 0 < p0+ < 1, got {p0}")
    w = w if isinstance(w, ModelWeights) else ModelWeights(w)
    wstar = limiting_weights(w, marginal_densities(p0))
    p11 = params.p[3]
    return LimitProfile.assemble(wstar, (p11 + 0.5 * p0, p11 / p1))


def _limits_batch(p, w):
    """(psi*_0, psi*_1, psi*_MIX) for an ``(n, 4)`` array of cells."""
    p0 = p[:, 0] + p[:, 1]
    p1 = 1.0 - p0
    psi0 = p[:, 3] + 0.5 * p0
    psi1 = p[:, 3] / p1
    dens = np.column_stack(marginal_densities(p0))
    ws = limiting_weights_batch(w, dens)
    return psi0, psi1, ws[:, 0] * psi0 + ws[:, 1] * psi1


def discrepancy_formula(p, w=None):
    """``psi*_MIX - psi`` written out in closed form for equal prior weights.

    Used as an independent check on the limit machinery.
    """
    p = np.atleast_2d(np.asarray(p, float))
    p0 = p[:, 0] + p[:, 1]
    p1 = p[:, 2] + p[:, 3]
    r = 6.0 * p0 * p1
    return r / (1 + r) * (p[:, 3] + p0 / 2) + 1 / (1 + r) * (p[:, 3] / p1) - (p[:, 1] + p[:, 3])


# --------------------------------------------------------------------------
# priors


def _batch_from_cells(p, model):
    p0 = p[:, 0] + p[:, 1]
    phi = np.column_stack([p0, p[:, 2], p[:, 3]])
    with np.errstate(invalid="ignore", divide="ignore"):
        s = p[:, 1] / p0
    return ScenarioBatch(phi, s, np.full(len(p), model), p[:, 1] + p[:, 3])


def cells_of(batch):
    """Recover ``(p00, p01, p10, p11)`` from a batch."""
    p0, p10, p11 = batch.phi.T
    p01 = batch.lam * p0
    return np.column_stack([p0 - p01, p01, p10, p11])


def sample_nim(rng, size):
    return _batch_from_cells(sample_dirichlet([1.0, 1.0, 1.0, 1.0], rng, size=size), NIM)


def sample_mar(rng, size):
    gamma = rng.generator.uniform(size=size)
    psi = rng.generator.uniform(size=size)
    p = np.column_stack([(1 - gamma) * (1 - psi), (1 - gamma) * psi, gamma * (1 - psi), gamma * psi])
    return _batch_from_cells(p, MAR)


def adapter(w=None):
    w = ModelWeights([0.5, 0.5]) if w is None else (w if isinstance(w, ModelWeights) else ModelWeights(w))

    def inv_pi0(batch):
        return batch.phi[:, 2] + 0.5 * batch.phi[:, 0]

    def inv_mix(batch):
        return _limits_batch(cells_of(batch), w)[2]

    analytic = {
        ("pi0", "pi0"): 1.0 / 40.0,
        ("mix", "pi0"): w[NIM] / 40.0 + w[MAR] / 36.0,
    }
    return ExampleAdapter(
        example=EXAMPLE_ID,
        weights=w,
        samplers=(sample_nim, sample_mar),
        investigators={"pi0": inv_pi0, "mix": inv_mix},
        analytic_amse=analytic,
        label="ex1",
    )


def ramse_table_ex1(cfg, w=None):
    """Table of RAMSE values; cells with investigator ``pi0`` are exact."""
    return ramse_table(adapter(w), cfg)


def finite_n_amse(n, cfg, w=None, nature="mix"):
    """Monte Carlo AMSE of the model-averaged posterior mean at sample size ``n``.

    Counts are multinomial draws from each scenario's cells; the posterior
    mean uses the conjugate closed forms.  Converges to the large-sample
    cells of :func:`ramse_table_ex1` as ``n`` grows.
    """
    from .core import PURPOSE_CHECK, draw_scenarios

    w = ModelWeights([0.5, 0.5]) if w is None else (w if isinstance(w, ModelWeights) else ModelWeights(w))
    samplers = (sample_nim, sample_mar)
    strata = [0] if nature == "pi0" else [0, 1]
    total = 0.0
    for j in strata:
        batch = draw_scenarios(samplers[j], cfg.draws_per_prior, cfg, example=EXAMPLE_ID, purpose=PURPOSE_CHECK, model=j)
        p = cells_of(batch)
        rng = RngStream(cfg.seed, stream_id(EXAMPLE_ID, PURPOSE_CHECK, 16 + j, n % (1 << 40)))
        obs = np.column_stack([p[:, 0] + p[:, 1], p[:, 2], p[:, 3]])
        obs = obs / obs.sum(axis=1, keepdims=True)
        counts = rng.generator.multinomial(n, obs)
        c0, c10, c11 = counts.T
        b = (n + 2.0) * (n + 3.0) / (6.0 * (c0 + 1.0) * (n - c0 + 1.0))
        odds = w[MAR] * b
        wt_nim = w[NIM] / (w[NIM] + odds)
        m_nim = 0.5 * (2 + c0) / (n + 4) + (1 + c11) / (n + 4)
        m_mar = (1 + c11) / (2.0 + c11 + c10)
        est = wt_nim * m_nim + (1 - wt_nim) * m_mar
        weight = 1.0 if nature == "pi0" else w[j]
        total += weight * float(np.mean((est - batch.psi_true) ** 2))
    return total


def figure_curves(cfg, counts=STUDY_COUNTS, w=None, n_grid=400):
    post = finite_posterior(counts, ModelWeights([0.5, 0.5]) if w is None else w, cfg)
    return post, post.density_curves(n_grid=n_grid)


def amse_exact(w=None):
    """Exact AMSE cells for investigator ``pi0``: 1/40 and w0/40 + w1/36."""
    w = ModelWeights([0.5, 0.5]) if w is None else w
    return {"pi0": 1.0 / 40.0, "mix": w[NIM] / 40.0 + w[MAR] / 36.0}


def ramse_exact(w=None):
    return {k: math.sqrt(v) for k, v in amse_exact(w).items()}
