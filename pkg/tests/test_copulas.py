import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from tscopula.copulas import (FAMILIES, Clayton, Frank, Gaussian, Gumbel, Independence,
                              StudentT, debye1, family_class, kendall_tau_inverse)
from tscopula.errors import DomainError, OutOfRange

AT_HALF = [kendall_tau_inverse(f, 0.5) for f in FAMILIES]
unit = st.floats(0.01, 0.99)


def test_closed_form_values():
    assert Clayton(2.0).cdf(0.5, 0.5) == pytest.approx(7 ** -0.5, abs=1e-12)
    assert Clayton(2.0).partial(0.5, 0.5) == pytest.approx(0.5 ** -3 * 7 ** -1.5, abs=1e-12)
    assert Gaussian(0.0).cdf(0.3, 0.7) == pytest.approx(0.21, abs=1e-7)
    np.testing.assert_allclose(Gaussian(0.0).partial([0.2, 0.6], [0.3, 0.9]), [0.3, 0.9],
                               atol=1e-12)
    assert Independence().cdf(0.3, 0.7) == pytest.approx(0.21)


@pytest.mark.parametrize("model", AT_HALF, ids=lambda m: m.family)
def test_uniform_margins_and_grounding(model):
    u = np.linspace(0, 1, 11)
    np.testing.assert_allclose(model.cdf(u, 1.0), u, atol=1e-9)
    np.testing.assert_allclose(model.cdf(1.0, u), u, atol=1e-9)
    assert np.all(model.cdf(u, 0.0) == 0)


def test_independence_limits_of_the_density():
    g = np.linspace(0.1, 0.9, 5)
    u, v = np.meshgrid(g, g)
    np.testing.assert_allclose(Frank(1e-8).pdf(u, v), 1.0, atol=1e-4)
    np.testing.assert_allclose(Gaussian(0.0).pdf(u, v), 1.0, atol=1e-12)


def test_frank_pdf_matches_cdf_differences():
    m, h = Frank(5.736), 1e-4
    fd = (m.cdf(0.5 + h, 0.5 + h) - m.cdf(0.5 + h, 0.5 - h)
          - m.cdf(0.5 - h, 0.5 + h) + m.cdf(0.5 - h, 0.5 - h)) / (4 * h * h)
    assert m.pdf(0.5, 0.5) == pytest.approx(fd, rel=1e-4)


@pytest.mark.parametrize("model", AT_HALF, ids=lambda m: m.family)
def test_density_integrates_to_one(model):
    total, _ = integrate.dblquad(lambda v, u: float(model.pdf(u, v)), 1e-9, 1 - 1e-9,
                                 1e-9, 1 - 1e-9, epsabs=1e-5, epsrel=1e-5)
    assert total == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("model", AT_HALF, ids=lambda m: m.family)
def test_partial_matches_cdf_differences_on_grid(model):
    g = np.linspace(0.1, 0.9, 9)
    u, v = np.meshgrid(g, g)
    h = 1e-6
    for j in (1, 2):
        if j == 1:
            fd = (model.cdf(u + h, v) - model.cdf(u - h, v)) / (2 * h)
        else:
            fd = (model.cdf(u, v + h) - model.cdf(u, v - h)) / (2 * h)
        np.testing.assert_allclose(model.partial(u, v, j), fd, atol=1e-5)


def test_elliptical_cdf_against_scipy():
    for rho in (-0.8, 0.3, 0.95):
        cov = [[1, rho], [rho, 1]]
        x = np.array([-0.7, 1.1])
        want = stats.multivariate_normal(cov=cov).cdf(x)
        u, v = stats.norm.cdf(x)
        assert Gaussian(rho).cdf(u, v) == pytest.approx(want, abs=1e-7)
        t = stats.multivariate_t(shape=cov, df=4)
        want = t.cdf(x, maxpts=2_000_000, random_state=0)
        u, v = stats.t.cdf(x, 4)
        assert StudentT(rho, 4.0).cdf(u, v) == pytest.approx(want, abs=1e-5)


def test_kendall_tau_closed_forms():
    assert Clayton(2.0).kendall_tau() == pytest.approx(0.5)
    assert Gaussian(0.0).kendall_tau() == 0.0
    assert Frank(5.7363).kendall_tau() == pytest.approx(0.5, abs=1e-4)
    # Debye oracle by direct quadrature
    x = 3.7
    ref, _ = integrate.quad(lambda t: t / np.expm1(t), 0, x)
    assert debye1(x) == pytest.approx(ref / x, rel=1e-12)


@pytest.mark.parametrize("model", [Clayton(2.0), Frank(-4.0), Gumbel(1.7), StudentT(0.4, 4.0)],
                         ids=lambda m: m.family)
def test_kendall_tau_against_double_integral(model):
    # tau = 1 - 4 * E[dC/du * dC/dv] for an absolutely continuous copula
    g, w = np.polynomial.legendre.leggauss(80)
    g, w = (g + 1) / 2, w / 2
    u, v = np.meshgrid(g, g)
    integrand = model.partial(u, v, 1) * model.partial(u, v, 2)
    value = 1 - 4 * np.sum(w[:, None] * w[None, :] * integrand)
    assert value == pytest.approx(model.kendall_tau(), abs=1e-3)


def test_inverse_examples():
    assert kendall_tau_inverse("clayton", 0.25).theta == pytest.approx(2 / 3)
    assert kendall_tau_inverse("gumbel", 0.75).theta == pytest.approx(4.0)
    assert kendall_tau_inverse("gaussian", 0.5).rho == pytest.approx(np.sin(np.pi / 4))
    assert kendall_tau_inverse("student", 0.5).nu == 4.0
    for fam, tau in [("clayton", 0.0), ("clayton", -0.2), ("gumbel", -0.1), ("frank", 0.0)]:
        with pytest.raises(OutOfRange):
            kendall_tau_inverse(fam, tau)


def test_errors_and_lookup():
    with pytest.raises(DomainError):
        Clayton(2.0).pdf(0.0, 0.5)
    with pytest.raises(DomainError):
        Gumbel(2.0).partial(0.5, 1.0)
    with pytest.raises(DomainError):
        Frank(3.0).cdf(1.2, 0.5)
    assert family_class("Normal") is Gaussian
    assert family_class("t") is StudentT
    with pytest.raises(ValueError):
        family_class("joe")


@pytest.mark.parametrize("model", AT_HALF, ids=lambda m: m.family)
def test_sampling_is_reproducible(model):
    a = model.sample(500, seed=11)
    assert a.shape == (500, 2)
    assert np.array_equal(a, model.sample(500, seed=11))
    assert not np.array_equal(a, model.sample(500, seed=12))
    assert np.all((a > 0) & (a < 1))


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(list(FAMILIES)), st.floats(0.05, 0.9), unit, unit)
def test_exchangeability_and_frechet_bounds(fam, tau, u, v):
    m = kendall_tau_inverse(fam, tau)
    c = m.cdf(u, v)
    assert c == pytest.approx(m.cdf(v, u), abs=1e-9)
    assert max(u + v - 1, 0) - 1e-12 <= c <= min(u, v) + 1e-12
    if fam != "student":
        # positive quadrant dependence; the t copula lacks it in the off-diagonal corners
        assert c >= u * v - 1e-9


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(list(FAMILIES)), st.floats(-0.9, 0.95), unit, unit, unit)
def test_partial_is_monotone_in_other_coordinate(fam, tau, u, v1, v2):
    if tau <= 0.02 and fam in ("clayton", "gumbel") or abs(tau) < 0.02:
        return
    m = kendall_tau_inverse(fam, tau)
    lo, hi = sorted((v1, v2))
    assert m.partial(u, lo) <= m.partial(u, hi) + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(list(FAMILIES)), st.floats(0.05, 0.9))
def test_tau_round_trip_property(fam, tau):
    assert kendall_tau_inverse(fam, tau).kendall_tau() == pytest.approx(tau, abs=1e-8)
