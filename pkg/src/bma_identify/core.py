"""Model-averaging arithmetic and the Bayes-risk Monte Carlo engine.

Every example plugs into the engine through an :class:`ExampleAdapter`:
one batch sampler per constituent prior (Nature's side) and one vectorized
limit evaluator per investigator prior (``"pi0"`` or ``"mix"``).  The
engine draws each prior's scenarios in fixed-size blocks, one random stream
per block, so results do not depend on the number of worker threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
from typing import Callable, Mapping, Sequence

import numpy as np

from . import _backend
from .errors import ConfigError, InvestigatorError, SupportError
from .mc_stat import RngStream, stream_id

SUM_TOL = 1e-12
BLOCK_SIZE = 2048

NATURES = ("pi0", "mix")
INVESTIGATORS = ("pi0", "mix")

# stream purpose tags
PURPOSE_TABLE = 1
PURPOSE_ENSEMBLE = 2
PURPOSE_CALIBRATE = 3
PURPOSE_FIGURE = 4
PURPOSE_CHECK = 5


def _frozen_array(values, dtype=float):
    a = np.array(values, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Simplex:
    """Probability vector over ``d`` cells."""

    values: np.ndarray

    def __post_init__(self):
        v = _frozen_array(self.values)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("simplex values must be a non-empty 1-d sequence")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError(f"simplex entries must be finite and nonnegative: {v.tolist()}")
        if abs(v.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"simplex entries sum to {v.sum()!r}, not 1")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __getitem__(self, i):
        return float(self.values[i])

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __eq__(self, other):
        return isinstance(other, Simplex) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())


@dataclass(frozen=True, eq=False)
class ModelWeights:
    """Weights over models ``0..J``; index 0 is the base model."""

    weights: np.ndarray

    def __post_init__(self):
        w = _frozen_array(self.weights)
        if w.ndim != 1 or w.size < 2:
            raise ValueError("need weights for at least two models")
        if np.any(w < 0) or np.any(w > 1) or not np.all(np.isfinite(w)):
            raise ValueError(f"model weights must lie in [0, 1]: {w.tolist()}")
        if abs(w.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"model weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def normalized(cls, raw):
        raw = np.asarray(raw, dtype=float)
        total = raw.sum()
        if not total > 0:
            raise ValueError("cannot normalize weights with nonpositive total")
        return cls(raw / total)

    @classmethod
    def equal(cls, n_models):
        return cls(np.full(n_models, 1.0 / n_models))

    def __len__(self):
        return self.weights.size

    def __getitem__(self, j):
        return float(self.weights[j])

    def __iter__(self):
        return iter(self.weights.tolist())

    def __eq__(self, other):
        return isinstance(other, ModelWeights) and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash(self.weights.tobytes())

    def __repr__(self):
        return f"ModelWeights({self.weights.tolist()})"


@dataclass(frozen=True)
class LimitProfile:
    """Limiting weights, per-model limiting means and their mixture."""

    wstar: ModelWeights
    psi_star: tuple
    psi_mix: float

    def __post_init__(self):
        if len(self.psi_star) != len(self.wstar):
            raise ValueError("psi_star and wstar lengths differ")
        object.__setattr__(self, "psi_star", tuple(None if p is None else float(p) for p in self.psi_star))
        expect = mixture_limit(self.wstar, self.psi_star)
        if abs(expect - self.psi_mix) > 1e-12:
            raise ValueError(f"psi_mix {self.psi_mix!r} inconsistent with weights (expected {expect!r})")

    @classmethod
    def assemble(cls, wstar, psi_star):
        return cls(wstar, tuple(psi_star), mixture_limit(wstar, psi_star))


@dataclass(frozen=True)
class RamseCell:
    value: float
    mc_se: float = 0.0
    n_draws: int = 0

    def __post_init__(self):
        if not self.value >= 0 or not self.mc_se >= 0:
            raise ValueError(f"RAMSE cell must be nonnegative: {self}")

    @property
    def analytic(self):
        return self.n_draws == 0

    @property
    def amse(self):
        return self.value**2


@dataclass(frozen=True)
class RamseTable:
    """RAMSE over (Nature prior) x (investigator prior), both in {pi0, mix}."""

    cells: Mapping
    pct_unwarranted: float
    pct_warranted: float
    pct_unwarranted_se: float = 0.0
    pct_warranted_se: float = 0.0
    label: str = ""

    def __post_init__(self):
        missing = [(n, i) for n in NATURES for i in INVESTIGATORS if (n, i) not in self.cells]
        if missing:
            raise ValueError(f"missing cells {missing}")

    def cell(self, nature, investigator):
        return self.cells[(nature, investigator)]

    def matrix(self):
        return np.array([[self.cells[(n, i)].value for i in INVESTIGATORS] for n in NATURES])

    @classmethod
    def from_cells(cls, cells, pct_unwarranted_se=0.0, pct_warranted_se=0.0, label=""):
        a, b = cells[("pi0", "pi0")].value, cells[("pi0", "mix")].value
        c, d = cells[("mix", "pi0")].value, cells[("mix", "mix")].value
        return cls(
            dict(cells),
            pct_unwarranted=100.0 * (b / a - 1.0),
            pct_warranted=100.0 * (1.0 - d / c),
            pct_unwarranted_se=pct_unwarranted_se,
            pct_warranted_se=pct_warranted_se,
            label=label,
        )


@dataclass(frozen=True)
class McConfig:
    seed: int = 20190119
    draws_per_prior: int = 10_000
    quad_nodes: int = 64
    root_tol: float = 1e-12
    root_scan_points: int = 512
    threads: int | None = None

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        for name in ("draws_per_prior", "quad_nodes", "root_scan_points"):
            if int(getattr(self, name)) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.root_tol > 0:
            raise ConfigError(f"root_tol must be positive, got {self.root_tol}")
        if self.threads is not None and int(self.threads) < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")

    def with_(self, **kw):
        from dataclasses import replace

        return replace(self, **kw)


@dataclass(frozen=True)
class ScenarioDraw:
    phi: object
    lam: object
    source_model: int
    psi_true: float
    on_restriction: bool = False


@dataclass(frozen=True)
class ScenarioBatch:
    """Column-wise container of Nature draws; row ``i`` is one :class:`ScenarioDraw`."""

    phi: np.ndarray
    lam: np.ndarray
    source_model: np.ndarray
    psi_true: np.ndarray
    on_restriction: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.psi_true)
        for name in ("phi", "lam", "source_model"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"batch column {name} has wrong length")
        if self.on_restriction is None:
            object.__setattr__(self, "on_restriction", np.zeros(n, dtype=bool))

    def __len__(self):
        return len(self.psi_true)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return ScenarioBatch(
                self.phi[idx], self.lam[idx], self.source_model[idx],
                self.psi_true[idx], self.on_restriction[idx],
            )
        return ScenarioDraw(
            np.array(self.phi[idx]), np.array(self.lam[idx]) if np.ndim(self.lam[idx]) else float(self.lam[idx]),
            int(self.source_model[idx]), float(self.psi_true[idx]), bool(self.on_restriction[idx]),
        )

    @classmethod
    def concat(cls, batches):
        batches = list(batches)
        return cls(
            np.concatenate([b.phi for b in batches]),
            np.concatenate([b.lam for b in batches]),
            np.concatenate([b.source_model for b in batches]),
            np.concatenate([b.psi_true for b in batches]),
            np.concatenate([b.on_restriction for b in batches]),
        )


Sampler = Callable[[RngStream, int], ScenarioBatch]
Investigator = Callable[[ScenarioBatch], np.ndarray]


@dataclass(frozen=True)
class StratifiedNature:
    """Nature's mixture prior, drawn with a fixed count from each constituent."""

    weights: ModelWeights
    samplers: Sequence[Sampler]


@dataclass(frozen=True)
class ExampleAdapter:
    example: int
    weights: ModelWeights
    samplers: Sequence[Sampler]
    investigators: Mapping[str, Investigator]
    analytic_amse: Mapping = field(default_factory=dict)
    label: str = ""


# --------------------------------------------------------------------------
# weights and limits


def limiting_weights(prior_weights, phi_marginal_densities):
    """Limiting posterior model weights, proportional to ``w_j * pi_j(phi)``."""
    w = prior_weights.weights if isinstance(prior_weights, ModelWeights) else np.asarray(prior_weights, float)
    d = np.asarray(phi_marginal_densities, dtype=float)
    if d.shape != w.shape:
        raise ValueError(f"{d.size} densities for {w.size} models")
    if np.any(d < 0) or np.any(np.isnan(d)):
        raise ValueError(f"marginal densities must be nonnegative: {d.tolist()}")
    prod = w * d
    total = prod.sum()
    if not total > 0:
        raise SupportError("scenario outside all model supports")
    if not math.isfinite(total):
        raise SupportError("infinite marginal density")
    return ModelWeights(prod / total)


def limiting_weights_batch(prior_weights, densities):
    """Row-wise :func:`limiting_weights` over an ``(n, J+1)`` density array."""
    w = np.asarray(prior_weights.weights if isinstance(prior_weights, ModelWeights) else prior_weights, float)
    prod = np.asarray(densities, dtype=float) * w
    total = prod.sum(axis=1, keepdims=True)
    if np.any(~(total > 0)):
        raise SupportError("scenario outside all model supports")
    return prod / total


def mixture_limit(wstar, psi_star):
    """Limit of the model-averaged posterior mean, sum over ``w*_j psi*_j``."""
    w = wstar.weights if isinstance(wstar, ModelWeights) else np.asarray(wstar, float)
    if len(psi_star) != w.size:
        raise ValueError(f"{len(psi_star)} limits for {w.size} weights")
    total = 0.0
    for j, (wj, pj) in enumerate(zip(w, psi_star)):
        if wj > 0:
            if pj is None or not math.isfinite(pj):
                raise ValueError(f"psi_star[{j}] missing but its limiting weight is {wj}")
            total += wj * pj
    return float(total)


def mixture_limit_batch(wstar, psi_star):
    """Row-wise mixture limit; NaN limits are allowed where the weight is 0."""
    wstar = np.asarray(wstar, float)
    psi_star = np.asarray(psi_star, float)
    bad = (wstar > 0) & ~np.isfinite(psi_star)
    if np.any(bad):
        row = int(np.argwhere(bad)[0, 0])
        raise InvestigatorError(row, "missing limiting mean with positive weight")
    return np.where(wstar > 0, wstar * np.nan_to_num(psi_star), 0.0).sum(axis=1)


# --------------------------------------------------------------------------
# parallel Monte Carlo plumbing


def _workers(cfg):
    if cfg.threads is None:
        return _backend.max_threads()
    if _backend.threads_capped():
        return min(int(cfg.threads), _backend.max_threads())
    return int(cfg.threads)


def parallel_map(fn, items, workers):
    """Ordered map, threaded when ``workers > 1``."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as ex:
        return list(ex.map(fn, items))


def _blocks(n):
    return [(k, min(BLOCK_SIZE, n - k * BLOCK_SIZE)) for k in range(-(-n // BLOCK_SIZE))]


def draw_scenarios(sampler, n, cfg, *, example, purpose=PURPOSE_TABLE, model=0):
    """Draw ``n`` scenarios, one random stream per block of ``BLOCK_SIZE`` draws."""
    if n <= 0:
        raise ConfigError("need at least one draw")

    def one(block):
        k, size = block
        rng = RngStream(cfg.seed, stream_id(example, purpose, model, k))
        out = sampler(rng, size)
        if len(out) != size:
            raise RuntimeError(f"sampler returned {len(out)} draws, expected {size}")
        return out

    return ScenarioBatch.concat(parallel_map(one, _blocks(n), _workers(cfg)))


def evaluate(investigator, batch, cfg):
    """Apply a vectorized limit evaluator blockwise; failures carry the draw index."""

    def one(block):
        k, size = block
        start = k * BLOCK_SIZE
        part = batch[start:start + size]
        try:
            return np.asarray(investigator(part), dtype=float)
        except InvestigatorError as err:
            raise InvestigatorError(start + err.draw_index, err.cause) from err
        except Exception as err:
            for i in range(size):
                try:
                    investigator(part[i:i + 1])
                except Exception as inner:
                    raise InvestigatorError(start + i, inner) from inner
            raise InvestigatorError(start, err) from err

    out = np.concatenate(parallel_map(one, _blocks(len(batch)), _workers(cfg)))
    if not np.all(np.isfinite(out)):
        raise InvestigatorError(int(np.argwhere(~np.isfinite(out))[0, 0]), "non-finite limit")
    return out


def squared_errors(batch, investigator, cfg):
    return (evaluate(investigator, batch, cfg) - batch.psi_true) ** 2


def _mean_var(e):
    n = e.size
    return float(e.mean()), (float(e.var(ddof=1)) / n if n > 1 else 0.0)


def _cell_from_amse(amse, var, n_draws):
    value = math.sqrt(max(amse, 0.0))
    se = math.sqrt(var) / (2.0 * value) if value > 0 else 0.0
    return RamseCell(value, se, n_draws)


def ramse_mc(nature, investigator, cfg, *, example=0, purpose=PURPOSE_TABLE):
    """Monte Carlo RAMSE of one investigator under one Nature prior.

    ``nature`` is a batch sampler or a :class:`StratifiedNature`.  The SE is
    mapped from the AMSE scale by the delta method.
    """
    if isinstance(nature, StratifiedNature):
        strata = [(j, float(w), s) for j, (w, s) in enumerate(zip(nature.weights, nature.samplers)) if w > 0]
    else:
        strata = [(0, 1.0, nature)]
    amse = var = 0.0
    total = 0
    for j, w, sampler in strata:
        batch = draw_scenarios(sampler, cfg.draws_per_prior, cfg, example=example, purpose=purpose, model=j)
        m, v = _mean_var(squared_errors(batch, investigator, cfg))
        amse += w * m
        var += w * w * v
        total += len(batch)
    return _cell_from_amse(amse, var, total)


def _ratio_pct_se(ma, mb, va, vb, cov):
    """SE (percentage points) of ``100 * sqrt(mb / ma)`` by first-order propagation."""
    if ma <= 0 or mb <= 0:
        return 0.0
    r = math.sqrt(mb / ma)
    rel = vb / mb**2 + va / ma**2 - 2.0 * cov / (ma * mb)
    return 100.0 * 0.5 * r * math.sqrt(max(rel, 0.0))


def ramse_table(adapter, cfg, *, purpose=PURPOSE_TABLE):
    """Fill the 2x2 RAMSE table for an example.

    Each constituent prior is drawn ``cfg.draws_per_prior`` times and every
    investigator is evaluated on the same draws, so the percentage-change
    SEs account for the pairing.  Nature's ``pi0`` row reuses the stratum-0
    draws of the mixture row.
    """
    w = adapter.weights
    analytic = adapter.analytic_amse

    def need(j, inv):
        if j == 0 and ("pi0", inv) not in analytic:
            return True
        return w[j] > 0 and ("mix", inv) not in analytic

    stats = {}  # (j, inv) -> errors
    for j, sampler in enumerate(adapter.samplers):
        invs = [inv for inv in INVESTIGATORS if need(j, inv)]
        if not invs:
            continue
        batch = draw_scenarios(sampler, cfg.draws_per_prior, cfg, example=adapter.example, purpose=purpose, model=j)
        for inv in invs:
            stats[(j, inv)] = squared_errors(batch, adapter.investigators[inv], cfg)

    moments = {}  # (nature, inv) -> (amse, var, n)
    for inv in INVESTIGATORS:
        if ("pi0", inv) in analytic:
            moments[("pi0", inv)] = (float(analytic[("pi0", inv)]), 0.0, 0)
        else:
            m, v = _mean_var(stats[(0, inv)])
            moments[("pi0", inv)] = (m, v, stats[(0, inv)].size)
        if ("mix", inv) in analytic:
            moments[("mix", inv)] = (float(analytic[("mix", inv)]), 0.0, 0)
        else:
            m = v = 0.0
            n = 0
            for j in range(len(adapter.samplers)):
                if w[j] > 0:
                    mj, vj = _mean_var(stats[(j, inv)])
                    m += w[j] * mj
                    v += w[j] ** 2 * vj
                    n += stats[(j, inv)].size
            moments[("mix", inv)] = (m, v, n)

    def cov(nature):
        if any((nature, inv) in analytic for inv in INVESTIGATORS):
            return 0.0
        strata = [0] if nature == "pi0" else [j for j in range(len(adapter.samplers)) if w[j] > 0]
        scale = (lambda j: 1.0) if nature == "pi0" else (lambda j: w[j] ** 2)
        total = 0.0
        for j in strata:
            a, b = stats[(j, "pi0")], stats[(j, "mix")]
            if a.size > 1:
                total += scale(j) * float(np.cov(a, b, ddof=1)[0, 1]) / a.size
        return total

    cells = {key: _cell_from_amse(*val) for key, val in moments.items()}
    se_u = _ratio_pct_se(
        moments[("pi0", "pi0")][0], moments[("pi0", "mix")][0],
        moments[("pi0", "pi0")][1], moments[("pi0", "mix")][1], cov("pi0"),
    )
    se_w = _ratio_pct_se(
        moments[("mix", "pi0")][0], moments[("mix", "mix")][0],
        moments[("mix", "pi0")][1], moments[("mix", "mix")][1], cov("mix"),
    )
    return RamseTable.from_cells(cells, se_u, se_w, label=adapter.label)
