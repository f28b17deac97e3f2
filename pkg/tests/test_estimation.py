import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tscopula.copulas import Clayton, Frank, Gaussian, Gumbel, StudentT
from tscopula.errors import OutOfRange
from tscopula.estimation import (fit, fit_ik, fit_md, fit_md_to_values, fit_mpl, ik_std_error,
                                 kendall_s, sample_kendall_tau, sandwich_variance)
from tscopula.residual_copula import ResidualCopulaData


def brute_s(x, y):
    s = 0
    for i, j in itertools.combinations(range(len(x)), 2):
        s += np.sign(x[i] - x[j]) * np.sign(y[i] - y[j])
    return s


def oracle_data(model, n, seed):
    return ResidualCopulaData.from_pairs(model.sample(n, seed=seed))


def test_kendall_tau_examples():
    x = np.arange(10.0)
    assert sample_kendall_tau(np.column_stack([x, 2 * x + 1])) == 1.0
    assert sample_kendall_tau([[1, 2], [2, 1]]) == -1.0
    rng = np.random.default_rng(10)
    pairs = rng.standard_normal((10, 2))
    assert sample_kendall_tau(pairs) == brute_s(pairs[:, 0], pairs[:, 1]) / 45
    with pytest.raises(ValueError):
        sample_kendall_tau([[0.1, 0.2]])


@settings(max_examples=80, deadline=None)
@given(arrays(np.int8, st.integers(2, 60), elements=st.integers(-4, 4)),
       st.randoms(use_true_random=False))
def test_merge_count_equals_pair_loop(x, rnd):
    y = np.array([rnd.randint(-4, 4) for _ in x], dtype=float)
    x = x.astype(float)
    s = kendall_s(x, y, "merge")
    assert s == kendall_s(x, y, "pairs") == brute_s(x, y)


def test_ik_hand_cases():
    # one element moved to the front of 16 sorted values: 15 of 120 pairs discordant
    x = np.arange(16.0)
    y = np.concatenate([[15.0], np.arange(15.0)])
    data = ResidualCopulaData.from_pairs(np.column_stack([x, y]))
    res = fit_ik(data, "clayton", std_error=False)
    assert res.model.theta == pytest.approx(6.0)
    with pytest.raises(OutOfRange):
        fit_ik(ResidualCopulaData.from_pairs(np.column_stack([x, x])), "clayton")
    zero = ResidualCopulaData.from_pairs([[1, 2], [2, 4], [3, 1], [4, 3]])
    assert fit_ik(zero, "gaussian", std_error=False).model.rho == 0.0


def test_ik_standard_error_matches_monte_carlo_spread():
    model = Clayton(2 / 3)
    taus = [sample_kendall_tau(model.sample(200, seed=s)) for s in range(400)]
    se_at_truth, _, _ = ik_std_error(model, 200)
    assert se_at_truth == pytest.approx(np.std(taus), rel=0.15)
    assert fit_ik(oracle_data(model, 200, 1), "clayton").std_error > 0


def test_mpl_examples():
    data = oracle_data(Gaussian(0.0), 5000, 77)
    res = fit_mpl(data, "gaussian")
    assert abs(res.model.rho) < 0.03
    for fam, model in [("frank", Frank(5.736)), ("gumbel", Gumbel(2.0)),
                       ("clayton", Clayton(2.0))]:
        r = fit_mpl(oracle_data(model, 400, 3), fam)
        assert r.diagnostics["loglik"] >= r.diagnostics["seed_loglik"]
        assert r.tau == pytest.approx(r.model.kendall_tau(), abs=1e-10)


def test_mpl_sandwich_matches_monte_carlo_spread():
    model = Frank.from_tau(0.5)
    taus = [fit_mpl(oracle_data(model, 300, s), "frank").tau for s in range(200)]
    _, se = sandwich_variance(model, 300, draws=50_000, seed=5)
    assert se == pytest.approx(np.std(taus), rel=0.15)


def test_sandwich_at_independence():
    cov, se = sandwich_variance(Gaussian(0.0), 100, draws=50_000, seed=1)
    assert np.all(np.isfinite(cov)) and cov[0, 0] > 0
    # rank-based MPL at rho = 0 has asymptotic variance 1 on the rho scale
    assert 100 * cov[0, 0] == pytest.approx(1.0, rel=0.1)


def test_student_free_nu():
    data = oracle_data(StudentT(0.5, 5.0), 3000, 9)
    res = fit_mpl(data, "student", free_nu=True)
    rho, nu = res.model.params
    assert abs(rho - 0.5) < 0.05
    assert 2.5 < nu < 12


def test_md_recovers_exact_target():
    g = (np.arange(64) + 0.5) / 64
    U, V = np.meshgrid(g, g, indexing="ij")
    res = fit_md_to_values(Clayton(2.0).cdf(U, V), "clayton", tau_start=0.3)
    assert res.model.theta == pytest.approx(2.0, abs=1e-6)
    assert res.diagnostics["objective"] < 1e-15


def test_md_on_sample():
    res = fit_md(oracle_data(Clayton(2.0), 1000, 4), "clayton")
    assert abs(res.tau - 0.5) < 0.05
    assert res.diagnostics["objective"] <= res.diagnostics["seed_objective"]
    with pytest.raises(ValueError):
        fit_md(oracle_data(Clayton(2.0), 50, 4), "clayton", grid=8)


def test_dispatch():
    data = oracle_data(Gaussian(0.3), 300, 2)
    assert fit(data, "gaussian", "ik", std_error=False).method == "IK"
    assert fit(data, "gaussian", "MD").method == "MD"
    with pytest.raises(ValueError):
        fit(data, "gaussian", "GMM")
