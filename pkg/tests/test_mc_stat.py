import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from bma_identify.core import McConfig, Simplex
from bma_identify.errors import ConfigError, QuadratureError, RootFindingError
from bma_identify.mc_stat import (
    MULTIPLE_ROOTS,
    NO_ROOT,
    ROOT,
    Interval,
    RngStream,
    find_root,
    gauss_legendre,
    quad_1d,
    sample_beta,
    sample_dirichlet,
    sample_uniform,
    stream_id,
)


def test_stream_same_pair_same_sequence():
    a = RngStream(11, 5).generator.random(8)
    b = RngStream(11, 5).generator.random(8)
    assert np.array_equal(a, b)


def test_stream_distinct_ids_differ():
    a = RngStream(11, 5).generator.random(8)
    b = RngStream(11, 6).generator.random(8)
    c = RngStream(12, 5).generator.random(8)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_stream_independent_of_consumption_order():
    s1, s2 = RngStream(3, 1), RngStream(3, 2)
    x2_first = s2.generator.random(4)
    x1_after = s1.generator.random(4)
    assert np.array_equal(x1_after, RngStream(3, 1).generator.random(4))
    assert np.array_equal(x2_first, RngStream(3, 2).generator.random(4))


def test_stream_validates_range():
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(ValueError):
        RngStream(0, 1 << 64)


def test_stream_id_packing_is_injective():
    ids = {stream_id(e, p, m, b) for e in range(3) for p in range(3) for m in range(3) for b in (0, 1, 2**39)}
    assert len(ids) == 3 * 3 * 3 * 3
    with pytest.raises(ValueError):
        stream_id(256, 0, 0, 0)
    with pytest.raises(ValueError):
        stream_id(0, 0, 0, 1 << 40)


def test_interval_validation():
    assert Interval(0.0, 2.0).width == 2.0
    for lo, hi in ((1.0, 1.0), (2.0, 1.0), (0.0, math.inf)):
        with pytest.raises(ValueError):
            Interval(lo, hi)


# ---------------------------------------------------------------- sampling


def test_dirichlet_single_returns_simplex():
    s = sample_dirichlet([1, 1, 1, 1], RngStream(1))
    assert isinstance(s, Simplex) and len(s) == 4


def test_dirichlet_component_means():
    p = sample_dirichlet([1, 1, 1, 1], RngStream(2), size=1_000_000)
    se = math.sqrt(3 / 80 / 1_000_000)
    assert np.all(np.abs(p.mean(axis=0) - 0.25) < 4 * se)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)


def test_dirichlet_squared_difference_oracle():
    p = sample_dirichlet([1, 1, 1, 1], RngStream(3), size=400_000)
    d2 = (p[:, 1] - p[:, 0]) ** 2
    assert abs(d2.mean() - 0.1) < 4 * d2.std() / math.sqrt(d2.size)


def test_dirichlet_two_components_is_beta():
    p = sample_dirichlet([2, 1], RngStream(4), size=200_000)
    assert abs(p[:, 0].mean() - 2 / 3) < 4 * math.sqrt(1 / 18 / 200_000)


def test_dirichlet_uniform_marginal_ks():
    p = sample_dirichlet(np.ones(8), RngStream(5), size=100_000)
    assert stats.kstest(p[:, 3], stats.beta(1, 7).cdf).pvalue > 0.001


def test_dirichlet_rejects_bad_alphas():
    for bad in ([1, 0], [1, -1, 2], [1]):
        with pytest.raises(ValueError):
            sample_dirichlet(bad, RngStream(0))


def test_uniform_moments():
    rng = RngStream(6)
    assert abs(sample_uniform(Interval(0, 1), rng, 200_000).mean() - 0.5) < 0.003
    assert abs(sample_uniform(Interval(0.85, 1), rng, 200_000).mean() - 0.925) < 0.001
    assert abs(sample_uniform(Interval(0.5, 1), rng, 200_000).var() - 0.25 / 12) < 5e-4


def test_beta_moments():
    x = sample_beta(4, 18, RngStream(7), 400_000)
    assert abs(x.mean() - 4 / 22) < 4 * math.sqrt(0.00647 / 400_000)
    assert abs(x.var() - (4 / 22) * (18 / 22) / 23) < 1e-4
    u = sample_beta(1, 1, RngStream(8), 100_000)
    assert stats.kstest(u, "uniform").pvalue > 0.001
    with pytest.raises(ValueError):
        sample_beta(0, 1, RngStream(0))


# ---------------------------------------------------------------- quadrature


def test_quad_linear_and_cubic():
    assert quad_1d(lambda x: x, Interval(0, 1)) == pytest.approx(0.5, abs=1e-15)
    assert quad_1d(lambda x: x**3, Interval(0, 1), nodes=2) == pytest.approx(0.25, abs=1e-15)


def test_nested_quad_normalizer():
    iv = Interval(0.85, 1.0)
    val = quad_1d(lambda l0: quad_1d(lambda l1: (l0 + l1 - 1) ** -2, iv), iv)
    assert val == pytest.approx(2 * math.log(0.85) - math.log(0.7), abs=1e-12)
    assert val == pytest.approx(0.031638, abs=1e-6)


def test_quad_converges_with_nodes():
    iv = Interval(0.85, 1.0)

    def q(n):
        return quad_1d(lambda l0: quad_1d(lambda l1: (l0 + l1 - 1) ** -3, iv, n), iv, n)

    assert abs(q(40) - q(80)) < 1e-10


def test_quad_nonfinite_raises():
    with pytest.raises(QuadratureError):
        quad_1d(lambda x: math.nan, Interval(0, 1))


def test_gauss_legendre_mapping():
    x, w = gauss_legendre(8, Interval(2.0, 5.0))
    assert w.sum() == pytest.approx(3.0)
    assert np.all((x > 2) & (x < 5))
    with pytest.raises(ConfigError):
        gauss_legendre(0)


# ---------------------------------------------------------------- roots


def test_find_root_linear():
    r = find_root(lambda x: x - 0.3, Interval(0, 1), McConfig())
    assert r.status == ROOT and abs(r.root - 0.3) <= 1e-12


def test_find_root_none_and_multiple():
    assert find_root(lambda x: x * x + 1, Interval(0, 1), McConfig()).status == NO_ROOT
    r = find_root(lambda x: math.sin(10 * x), Interval(0.1, 1), McConfig())
    assert r.status == MULTIPLE_ROOTS and r.n_roots == 3


def test_find_root_exact_grid_zero():
    r = find_root(lambda x: x - 0.5, Interval(0, 1), McConfig(root_scan_points=4))
    assert r.status == ROOT and r.root == 0.5


def test_find_root_nonfinite_raises():
    with pytest.raises(RootFindingError):
        find_root(lambda x: 1 / (x - 0.5) if x != 0.5 else math.inf, Interval(0, 1), McConfig(root_scan_points=4))


@settings(max_examples=60, deadline=None)
@given(st.floats(0.001, 0.999))
def test_find_root_bracket_width(r0):
    res = find_root(lambda x: math.tanh(5 * (x - r0)), Interval(0, 1), McConfig())
    assert res.status == ROOT
    assert abs(res.root - r0) <= 1e-11
