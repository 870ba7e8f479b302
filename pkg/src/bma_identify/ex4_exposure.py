"""Average risk difference when the exposure may be misclassified.

Observed cells ``phi`` describe ``(C, X*, Y)`` and true cells ``q`` describe
``(C, X, Y)``, both indexed ``4*c + 2*x + y``.  Specificity is perfect and
misclassification is nondifferential, so a single sensitivity ``lambda``
links the two.  Model 0 truncates a Dirichlet(1, ..., 1) x Uniform(b, 1)
convenience prior to compatible pairs, model 1 fixes ``lambda = 1`` and
model 2 asserts no interaction on the risk-difference scale.

Model 2's image ``H`` and implied sensitivity ``m(phi)`` are found by a root
scan over ``lambda``.  The constants ``Pr*(phi in H)`` and
``E*[max(b, t(phi))]`` come from a Monte Carlo :func:`calibrate` run.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
import logging
import math

import numpy as np

from . import __version__, kernels
from .core import (
    PURPOSE_CALIBRATE,
    PURPOSE_ENSEMBLE,
    ExampleAdapter,
    LimitProfile,
    McConfig,
    ModelWeights,
    ScenarioBatch,
    Simplex,
    _blocks,
    _workers,
    draw_scenarios,
    limiting_weights,
    limiting_weights_batch,
    parallel_map,
    ramse_table,
)
from .errors import (
    ConfigError,
    DegenerateStratumError,
    IndeterminateRootError,
    MultipleRootsError,
    SamplingError,
)
from .mc_stat import RngStream, gauss_legendre, sample_dirichlet, stream_id

log = logging.getLogger(__name__)

EXAMPLE_ID = 4
REFERENCE_DRAWS = 1600
ENSEMBLE_DRAWS = 100
CALIB_DRAWS = 200_000
STARVATION_LIMIT = 1_000_000
CALIB_VERSION = 1
CLAMP_TOL = 1e-14

_X1 = np.array([2, 3, 6, 7])  # (c, y) cells with x = 1
_X0 = _X1 - 2


def cell(c, x, y):
    return 4 * c + 2 * x + y


@dataclass(frozen=True)
class CxyCells:
    q: Simplex

    def __post_init__(self):
        if not isinstance(self.q, Simplex):
            object.__setattr__(self, "q", Simplex(self.q))
        if len(self.q) != 8:
            raise ValueError("need 8 (C, X, Y) cells")


@dataclass(frozen=True)
class ObsCells:
    phi: Simplex

    def __post_init__(self):
        if not isinstance(self.phi, Simplex):
            object.__setattr__(self, "phi", Simplex(self.phi))
        if len(self.phi) != 8:
            raise ValueError("need 8 (C, X*, Y) cells")


@dataclass(frozen=True)
class Calibration:
    prob_H: float
    expected_max_bt: float
    prob_H_se: float
    expected_max_bt_se: float
    draws: int
    seed: int
    b: float
    n_indeterminate: int = 0
    version: str = f"{__version__}/{CALIB_VERSION}"

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class Ex4Hyper:
    b: float = 0.5
    w: ModelWeights = field(default_factory=lambda: ModelWeights.equal(3))
    calib: Calibration | None = None

    def __post_init__(self):
        if not isinstance(self.w, ModelWeights):
            object.__setattr__(self, "w", ModelWeights(self.w))
        if len(self.w) != 3:
            raise ValueError("Example 4 needs three model weights")
        if not 0.0 < self.b < 1.0:
            raise ValueError(f"b must lie in (0, 1), got {self.b}")

    def with_calibration(self, calib):
        return replace(self, calib=calib)

    def require_calibration(self):
        c = self.calib
        if c is None:
            raise ConfigError("Example 4 needs calibration constants; run calibrate first")
        if c.b != self.b:
            raise ConfigError(f"calibration was run at b={c.b}, hyper has b={self.b}")
        if not 0.0 < c.prob_H <= 1.0:
            raise ConfigError(f"calibrated Pr(phi in H) must lie in (0, 1], got {c.prob_H}")
        return c


def _vec(cells):
    a = cells.q if isinstance(cells, CxyCells) else cells.phi if isinstance(cells, ObsCells) else cells
    return np.asarray(a, float)


# --------------------------------------------------------------------------
# maps between true and observed cells


def forward_map(q, lam):
    """Observed cells implied by true cells ``q`` at sensitivity ``lam``."""
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"sensitivity must lie in (0, 1], got {lam}")
    q = _vec(q)
    phi = q.copy()
    phi[_X1] = lam * q[_X1]
    phi[_X0] = q[_X0] + (1.0 - lam) * q[_X1]
    # the cells already sum to one up to rounding
    return ObsCells(Simplex(phi / phi.sum()))


def sensitivity_threshold_batch(phi):
    phi = np.atleast_2d(np.asarray(phi, float))
    num = phi[:, _X1]
    den = phi[:, _X0] + num
    if np.any((den <= 0.0) & (num > 0.0)):
        raise ValueError("exposed mass in a cell pair with no total mass")
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(den > 0.0, num / den, 0.0)
    return r.max(axis=1)


def sensitivity_threshold(phi):
    """Smallest sensitivity compatible with ``phi``."""
    return float(sensitivity_threshold_batch(_vec(phi))[0])


def inverse_map(phi, lam):
    """True cells at sensitivity ``lam``, or None when ``phi`` is incompatible."""
    if not lam > 0.0:
        raise ValueError(f"sensitivity must be positive, got {lam}")
    if lam > 1.0:
        return None
    phi = _vec(phi)
    kap = (1.0 - lam) / lam
    q = phi.copy()
    q[_X1] = phi[_X1] / lam
    q[_X0] = phi[_X0] - kap * phi[_X1]
    if np.any(q < -CLAMP_TOL):
        return None
    q = np.maximum(q, 0.0)
    return CxyCells(Simplex(q / q.sum()))


def stratum_risk_differences(q):
    q = _vec(q)
    out = []
    for c in range(2):
        x1 = q[cell(c, 1, 0)] + q[cell(c, 1, 1)]
        x0 = q[cell(c, 0, 0)] + q[cell(c, 0, 1)]
        if x1 <= 0.0 or x0 <= 0.0:
            raise DegenerateStratumError("degenerate stratum")
        out.append(q[cell(c, 1, 1)] / x1 - q[cell(c, 0, 1)] / x0)
    return out


def avg_risk_difference(q):
    q = _vec(q)
    rd0, rd1 = stratum_risk_differences(q)
    pc1 = q[4:].sum()
    return (1.0 - pc1) * rd0 + pc1 * rd1


def interaction(q):
    rd0, rd1 = stratum_risk_differences(q)
    return rd1 - rd0


# --------------------------------------------------------------------------
# the no-interaction image H


def _scan(phi, hyper, cfg):
    phi = np.atleast_2d(np.asarray(phi, float))
    lo = np.maximum(hyper.b, sensitivity_threshold_batch(phi))
    return kernels.ex4_scan(phi, lo, cfg.root_scan_points, cfg.root_tol)


def solve_m_batch(phi, hyper, cfg):
    """Root-scan status codes (see :mod:`.kernels`) and roots over ``[max(b, t), 1]``."""
    return _scan(phi, hyper, cfg)


def _raise_for(status, phi):
    if status == kernels.MULTI_ROOT:
        log.error("multiple sensitivity roots for phi=%s", np.asarray(phi).tolist())
        raise MultipleRootsError("multiple roots of the interaction in the sensitivity scan", phi)
    if status == kernels.INDETERMINATE:
        raise IndeterminateRootError("interaction undefined somewhere on the sensitivity scan")


def solve_m(phi, hyper, cfg):
    """``(m(phi), in_H)``; ``m`` is None when ``phi`` is outside ``H``."""
    v = _vec(phi)
    status, root = _scan(v, hyper, cfg)
    _raise_for(int(status[0]), v)
    if status[0] == kernels.ONE_ROOT:
        return float(root[0]), True
    return None, False


def _check_scan(status, phi):
    bad = np.flatnonzero((status == kernels.MULTI_ROOT) | (status == kernels.INDETERMINATE))
    if bad.size:
        _raise_for(int(status[bad[0]]), phi[bad[0]])


def _common_rd(phi, root):
    return kernels.ex4_rd_strata(phi, root)[:, 0]


# --------------------------------------------------------------------------
# calibration


def calibrate(hyper, cfg, draws=CALIB_DRAWS):
    """Monte Carlo estimates of ``Pr*(phi in H)`` and ``E*[max(b, t(phi))]``.

    Draws whose membership scan is indeterminate are dropped from the
    ``Pr*(phi in H)`` estimate and counted.
    """
    if draws < 2:
        raise ConfigError("calibration needs at least two draws")
    ones = np.ones(8)

    def one(block):
        k, size = block
        rng = RngStream(cfg.seed, stream_id(EXAMPLE_ID, PURPOSE_CALIBRATE, 0, k))
        phi = sample_dirichlet(ones, rng, size=size)
        mb = np.maximum(hyper.b, sensitivity_threshold_batch(phi))
        status, _ = _scan(phi, hyper, cfg)
        multi = np.flatnonzero(status == kernels.MULTI_ROOT)
        if multi.size:
            _raise_for(kernels.MULTI_ROOT, phi[multi[0]])
        ok = status != kernels.INDETERMINATE
        return int((status == kernels.ONE_ROOT).sum()), int(ok.sum()), float(mb.sum()), float((mb * mb).sum())

    parts = parallel_map(one, _blocks(draws), _workers(cfg))
    hits = sum(p[0] for p in parts)
    valid = sum(p[1] for p in parts)
    s1 = math.fsum(p[2] for p in parts)
    s2 = math.fsum(p[3] for p in parts)
    if valid < 2:
        raise SamplingError("calibration produced fewer than two usable draws")
    ph = hits / valid
    mean = s1 / draws
    var = max(s2 / draws - mean * mean, 0.0) * draws / (draws - 1)
    return Calibration(
        prob_H=ph,
        expected_max_bt=mean,
        prob_H_se=math.sqrt(ph * (1.0 - ph) / valid),
        expected_max_bt_se=math.sqrt(var / draws),
        draws=int(draws),
        seed=int(cfg.seed),
        b=float(hyper.b),
        n_indeterminate=int(draws - valid),
    )


def ensure_calibrated(hyper, cfg, draws=CALIB_DRAWS):
    if hyper.calib is not None and hyper.calib.b == hyper.b:
        return hyper
    return hyper.with_calibration(calibrate(hyper, cfg, draws))


# --------------------------------------------------------------------------
# limits


def _psi0(phi, lo, nodes):
    x, w = gauss_legendre(nodes)
    return kernels.ex4_psi0(phi, lo, x, w)


def limits_batch(phi, hyper, cfg):
    """``(n, 3)`` limiting weights and ``(n, 3)`` limits (NaN where unused)."""
    c = hyper.require_calibration()
    phi = np.atleast_2d(np.asarray(phi, float))
    t = sensitivity_threshold_batch(phi)
    lo = np.maximum(hyper.b, t)
    status, root = kernels.ex4_scan(phi, lo, cfg.root_scan_points, cfg.root_tol)
    _check_scan(status, phi)
    in_h = status == kernels.ONE_ROOT
    dens = np.column_stack([
        (1.0 - lo) / (1.0 - c.expected_max_bt),
        np.ones(len(phi)),
        np.where(in_h, 1.0 / c.prob_H, 0.0),
    ])
    ws = limiting_weights_batch(hyper.w, dens)
    psi = np.full((len(phi), 3), np.nan)
    psi[:, 0] = _psi0(phi, lo, cfg.quad_nodes)
    psi[:, 1] = kernels.ex4_psi0(phi, np.ones(len(phi)), np.zeros(1), np.full(1, 2.0))
    if in_h.any():
        psi[in_h, 2] = _common_rd(phi[in_h], root[in_h])
    return ws, psi


def limit_profile(phi_dagger, hyper, cfg=None):
    cfg = McConfig() if cfg is None else cfg
    c = hyper.require_calibration()
    phi = _vec(phi_dagger)
    lo = max(hyper.b, sensitivity_threshold(phi))
    m, in_h = solve_m(phi, hyper, cfg)
    dens = [(1.0 - lo) / (1.0 - c.expected_max_bt), 1.0, 1.0 / c.prob_H if in_h else 0.0]
    wstar = limiting_weights(hyper.w, dens)
    psi0 = float(_psi0(phi[None, :], np.array([lo]), cfg.quad_nodes)[0])
    psi1 = avg_risk_difference(phi)
    psi2 = float(_common_rd(phi[None, :], np.array([m]))[0]) if in_h else None
    return LimitProfile.assemble(wstar, (psi0, psi1, psi2))


# --------------------------------------------------------------------------
# priors


def _avg_rd_at(phi, lam):
    rd = kernels.ex4_rd_strata(phi, lam)
    pc1 = phi[:, 4:].sum(axis=1)
    return (1.0 - pc1) * rd[:, 0] + pc1 * rd[:, 1]


def _rejection(rng, size, rate_hint, propose):
    """Collect ``size`` accepted proposals; ``propose(rng, k)`` returns (accepted dict, mask)."""
    parts = []
    have = 0
    since_accept = 0
    while have < size:
        k = max(64, int(math.ceil((size - have) / rate_hint * 1.2)))
        out, mask = propose(rng, k)
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            since_accept += k
            if since_accept >= STARVATION_LIMIT:
                raise SamplingError(f"no proposal accepted in {since_accept} attempts")
            continue
        since_accept = k - 1 - idx[-1]
        take = idx[: size - have]
        parts.append({key: v[take] for key, v in out.items()})
        have += take.size
    return {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}


def sampler(model, hyper, cfg):
    ones = np.ones(8)

    def draw0(rng, size):
        def propose(rng, k):
            phi = sample_dirichlet(ones, rng, size=k)
            lam = rng.generator.uniform(hyper.b, 1.0, size=k)
            return {"phi": phi, "lam": lam}, lam > sensitivity_threshold_batch(phi)

        d = _rejection(rng, size, 0.3, propose)
        psi = _avg_rd_at(d["phi"], d["lam"])
        return ScenarioBatch(d["phi"], d["lam"], np.zeros(size, int), psi)

    def draw1(rng, size):
        phi = sample_dirichlet(ones, rng, size=size)
        lam = np.ones(size)
        return ScenarioBatch(phi, lam, np.ones(size, int), _avg_rd_at(phi, lam))

    def draw2(rng, size):
        def propose(rng, k):
            phi = sample_dirichlet(ones, rng, size=k)
            status, root = _scan(phi, hyper, cfg)
            multi = np.flatnonzero(status == kernels.MULTI_ROOT)
            if multi.size:
                _raise_for(kernels.MULTI_ROOT, phi[multi[0]])
            return {"phi": phi, "lam": root}, status == kernels.ONE_ROOT

        d = _rejection(rng, size, 0.08, propose)
        psi = _common_rd(d["phi"], d["lam"])
        return ScenarioBatch(d["phi"], d["lam"], np.full(size, 2), psi, np.ones(size, dtype=bool))

    if model not in (0, 1, 2):
        raise ValueError(f"model index must be 0, 1 or 2, got {model}")
    return (draw0, draw1, draw2)[model]


def sample_prior(model, hyper, rng, cfg=None):
    """One draw from model ``model``'s prior as a :class:`ScenarioDraw`."""
    return sampler(model, hyper, McConfig() if cfg is None else cfg)(rng, 1)[0]


def adapter(hyper, cfg):
    hyper.require_calibration()

    def inv_pi0(batch):
        phi = batch.phi
        lo = np.maximum(hyper.b, sensitivity_threshold_batch(phi))
        return _psi0(phi, lo, cfg.quad_nodes)

    def inv_mix(batch):
        ws, psi = limits_batch(batch.phi, hyper, cfg)
        return np.where(ws > 0, ws * np.nan_to_num(psi), 0.0).sum(axis=1)

    return ExampleAdapter(
        example=EXAMPLE_ID,
        weights=hyper.w,
        samplers=tuple(sampler(j, hyper, cfg) for j in range(3)),
        investigators={"pi0": inv_pi0, "mix": inv_mix},
        label="ex4",
    )


def ramse_table_ex4(hyper, cfg, calib_draws=CALIB_DRAWS):
    hyper = ensure_calibrated(hyper, cfg, calib_draws)
    return ramse_table(adapter(hyper, cfg), cfg)


def ensembles_wstar(hyper, cfg, n=ENSEMBLE_DRAWS, calib_draws=CALIB_DRAWS):
    """Limiting weights ``(n, 3)`` over ``n`` scenarios from each model's prior."""
    hyper = ensure_calibrated(hyper, cfg, calib_draws)
    out = []
    for j in range(3):
        batch = draw_scenarios(sampler(j, hyper, cfg), n, cfg, example=EXAMPLE_ID, purpose=PURPOSE_ENSEMBLE, model=j)
        out.append(limits_batch(batch.phi, hyper, cfg)[0])
    return out
