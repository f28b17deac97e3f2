import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tscopula.copulas import Independence
from tscopula.data import TimeSeriesSample
from tscopula.errors import EmptyRegion
from tscopula.residual_copula import (ResidualCopulaData, empirical_copula, estimate_residuals,
                                      ordinal_ranks, residuals, sup_distance)
from tscopula.smoothing import TRIWEIGHT, SmootherFit, WeightRegion
from tscopula.study import DgpSpec, generate


def fixed_fit(x, y, mean, var):
    """SmootherFit carrying prescribed fitted values."""
    x = np.asarray(x, float).reshape(-1, 1)
    y = np.asarray(y, float)
    return SmootherFit(x, y, 1, np.array([1.0]), np.array([1.0]), 1e-12, TRIWEIGHT,
                       np.asarray(mean, float), np.asarray(var, float), 0)


def brute_copula(pairs, u1, u2):
    """C(u1, u2) from scratch: marginal quantiles, then a joint count."""
    W = len(pairs)
    out = 0
    q = []
    for j, u in enumerate((u1, u2)):
        col = [p[j] for p in pairs]
        cands = [y for y in sorted(col) if sum(c <= y for c in col) / W >= u]
        # F(y) >= 0 holds for every real y, so the infimum at u = 0 is -inf
        q.append(cands[0] if u > 0 else -np.inf)
    for a, b in pairs:
        out += a <= q[0] and b <= q[1]
    return out / W


def brute_ranks(col):
    return [sum(c < x or (c == x and k <= i) for k, c in enumerate(col))
            for i, x in enumerate(col)]


def test_identity_transform_gives_ranks():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(30)
    y1, y2 = rng.standard_normal(30), rng.standard_normal(30)
    sample = TimeSeriesSample.shared(y1, y2, x)
    f1 = fixed_fit(x, y1, np.zeros(30), np.ones(30))
    f2 = fixed_fit(x, y2, np.zeros(30), np.ones(30))
    data = residuals(sample, f1, f2, WeightRegion((-np.inf,), (np.inf,)))
    np.testing.assert_array_equal(data.pairs, np.column_stack([y1, y2]))
    np.testing.assert_array_equal(data.pseudo[:, 0], ordinal_ranks(y1) / 31)


def test_five_point_hand_dataset():
    x = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
    y1 = np.array([1.0, 0.0, 5.0, 2.0, 4.0])
    y2 = np.array([-1.0, 3.0, 2.0, 7.0, 0.0])
    sample = TimeSeriesSample.shared(y1, y2, x)
    f1 = fixed_fit(x, y1, x, np.full(5, 4.0))
    f2 = fixed_fit(x, y2, x, np.full(5, 4.0))
    data = residuals(sample, f1, f2, WeightRegion((-1.0,), (10.0,)))
    want = np.column_stack([[0.5, -0.5, 1.5, -0.5, 0.0], [-0.5, 1.0, 0.0, 2.0, -2.0]])
    np.testing.assert_allclose(data.pairs, want)
    for j in range(2):
        col = data.pairs[:, j].tolist()
        np.testing.assert_array_equal(data.ranks[:, j], brute_ranks(col))
    assert data.pseudo.max() == pytest.approx(5 / 6)


def test_single_weighted_point_and_empty_region():
    data = ResidualCopulaData([[0.3, -1.0], [2.0, 5.0]], [0, 1])
    np.testing.assert_array_equal(data.pseudo, [[0.5, 0.5]])
    with pytest.raises(EmptyRegion):
        ResidualCopulaData([[0.3, -1.0]], [0])


def test_copula_corner_and_comonotone_diagonal():
    rng = np.random.default_rng(2)
    e = rng.standard_normal(40)
    c = empirical_copula(np.column_stack([e, e]))
    k = np.arange(1, 41)
    np.testing.assert_allclose(c(k / 40, k / 40), k / 40)
    assert c(1.0, 1.0) == 1.0
    assert c(0.0, 0.7) == 0.0


def test_eight_pairs_against_brute_force():
    rng = np.random.default_rng(8)
    pairs = rng.standard_normal((8, 2))
    c = empirical_copula(pairs)
    g = np.linspace(0, 1, 5)
    for a in g:
        for b in g:
            assert c(a, b) == pytest.approx(brute_copula(pairs.tolist(), a, b))
    np.testing.assert_allclose(c.lattice(g, g), np.vectorize(c)(g[:, None], g[None, :]))


def test_sup_distance_examples():
    rng = np.random.default_rng(10)
    c = empirical_copula(rng.standard_normal((50, 2)))
    assert sup_distance(c, c) == 0.0
    big = empirical_copula(rng.random((10_000, 2)))
    assert sup_distance(big, Independence()) < 0.025
    with pytest.raises(ValueError):
        sup_distance(c, c, grid=1)


def test_oracle_equality_with_true_functions():
    # Mod2 first series: m(x) = 0.7x, sigma = 1; second: m(x) = -0.5x
    gen = generate(DgpSpec("Mod2", "gaussian", 0.5, 200), seed=5)
    s = gen.sample
    x1, y1 = s.series(1)
    x2, y2 = s.series(2)
    f1 = fixed_fit(x1, y1, 0.7 * x1.ravel(), np.ones(200))
    f2 = fixed_fit(x2, y2, -0.5 * x2.ravel(), np.ones(200))
    data = residuals(s, f1, f2, WeightRegion((-np.inf,), (np.inf,)))
    oracle = empirical_copula(gen.innovations)
    resid = empirical_copula(data)
    np.testing.assert_array_equal(data.ranks, oracle.data.ranks)
    assert sup_distance(resid, oracle) == 0.0


def test_estimate_residuals_pipeline():
    gen = generate(DgpSpec("Mod3", "frank", 0.5, 300), seed=1)
    data = estimate_residuals(gen.sample)
    assert data.kind == "residual"
    assert 0.7 * 300 <= data.W <= 300
    s1, s2 = data.diagnostics["series"]
    assert len(s1.bandwidths) == 2
    fixed = estimate_residuals(gen.sample, bandwidth=(1.0, 1.5))
    assert fixed.diagnostics["series"][0].bandwidths == (1.0, 1.5)
    moment = estimate_residuals(gen.sample, variance="moment")
    assert moment.diagnostics["series"][0].fit.variance_target is None
    assert s1.fit.variance_target is not None


@settings(max_examples=40, deadline=None)
@given(arrays(float, (25, 2), elements=st.floats(-5, 5)),
       arrays(np.int8, 25, elements=st.integers(0, 1)))
def test_pseudo_observation_and_margin_invariants(pairs, w):
    if w.sum() == 0:
        w[0] = 1
    data = ResidualCopulaData(pairs, w)
    W = data.W
    for j in range(2):
        np.testing.assert_allclose(np.sort(data.pseudo[:, j]), np.arange(1, W + 1) / (W + 1))
    c = empirical_copula(data)
    k = np.arange(W + 1) / W
    np.testing.assert_allclose(c(k, 1.0), k)
    np.testing.assert_allclose(c(1.0, k), k)
    # weight consistency: dropping zero-weight rows changes nothing
    kept = empirical_copula(pairs[w.astype(bool)])
    g = np.linspace(0, 1, 13)
    np.testing.assert_array_equal(c.lattice(g, g), kept.lattice(g, g))
    # 2-increasing on the jump lattice
    L = c.lattice(k, k)
    assert np.all(np.diff(np.diff(L, axis=0), axis=1) >= -1e-12)


@settings(max_examples=40, deadline=None)
@given(arrays(np.int16, (30, 2), elements=st.integers(-300, 300), unique=True),
       st.sampled_from([np.exp, np.arctan, lambda t: t ** 3 + t]))
def test_monotone_invariance(grid_pairs, transform):
    # values on a 0.01 lattice so the transforms stay strictly increasing in floating point
    pairs = grid_pairs / 100.0
    c = empirical_copula(pairs)
    moved = pairs.copy()
    moved[:, 0] = transform(moved[:, 0])
    g = np.linspace(0, 1, 17)
    np.testing.assert_array_equal(c.lattice(g, g), empirical_copula(moved).lattice(g, g))
