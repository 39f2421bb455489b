import math

import numpy as np
import pytest
from scipy import integrate

from telecom_lde.errors import DomainError, InversionError
from telecom_lde.stable import StableSpec, cdf, cdf_grid, cf, gil_pelaez_sf, ks_one_sample, log_cf_quad, sf, tail_asymptotic

S = StableSpec(1.0, 1.5)


def test_cf_basic_properties():
    assert cf(S, 0.0) == 1.0 + 0j
    th = np.linspace(-20, 20, 81)
    np.testing.assert_allclose(cf(S, -th), np.conj(cf(S, th)), rtol=1e-15)
    assert np.all(np.abs(cf(S, th)) <= 1.0)


def test_cf_modulus_at_one():
    # -integral_0^inf (cos u - 1) u^(-2.5) du = 1.6710855..., computed once by quadrature
    assert abs(cf(S, 1.0)) == pytest.approx(math.exp(-1.6710855), rel=1e-7)
    assert S.decay == pytest.approx(1.6710855, rel=1e-7)


@pytest.mark.parametrize("gamma", [1.2, 1.5, 1.8])
def test_closed_form_matches_levy_khintchine_quadrature(gamma):
    spec = StableSpec(0.7, gamma)
    for th in np.linspace(-10, 10, 20):
        assert abs(cf(spec, th) - np.exp(log_cf_quad(spec, th))) < 1e-8


def test_stability_under_q_scaling():
    th = np.linspace(-5, 5, 11)
    np.testing.assert_allclose(cf(S, th) ** 3, cf(StableSpec(3.0, 1.5), th), rtol=1e-12)


def test_cdf_limits_and_monotone_grid():
    assert cdf(S, -20.0) < 1e-6
    assert cdf(S, 1e4) > 1 - 1e-5
    xs = np.linspace(-5, 30, 200)
    c = cdf_grid(S, xs)
    assert np.all(np.diff(c) >= 0) and np.all((c >= 0) & (c <= 1))


def test_two_inversions_agree():
    xs = np.array([-3.0, -1.0, 0.0, 0.5, 2.0, 10.0, 50.0])
    np.testing.assert_allclose(sf(S, xs, method="adaptive"), sf(S, xs, method="fixed"), atol=1e-6)


def test_tail_ratio_at_50():
    r = (1.0 - cdf(S, 50.0)) * 50.0**1.5 * 1.5 / S.Q
    assert 0.9 <= r <= 1.1


def test_mean_is_zero():
    # E S = integral_0^inf sf - integral_-inf^0 cdf; the sf tail past X uses (Q/gamma) x^-gamma
    X = 1e4
    f = lambda x: float(sf(S, x, method="fixed"))
    right = integrate.quad(f, 0.0, X, limit=400, points=[1, 10, 100, 1000])[0]
    right += S.Q / S.gamma * X ** (1 - S.gamma) / (S.gamma - 1)
    left = integrate.quad(lambda x: 1.0 - f(x), -10.0, 0.0, limit=200)[0]
    assert abs(right - left) < 1e-3


def test_tail_asymptotic():
    assert tail_asymptotic(S, 100.0) == pytest.approx(6.6667e-4, rel=1e-4)
    assert tail_asymptotic(S, 200.0) / tail_asymptotic(S, 100.0) == pytest.approx(2**-1.5, rel=1e-14)
    assert tail_asymptotic(StableSpec(2.0, 1.5), 7.0) == pytest.approx(2 * tail_asymptotic(S, 7.0), rel=1e-14)
    with pytest.raises(DomainError):
        tail_asymptotic(S, 0.0)


def test_inversion_failure_is_reported():
    with pytest.raises(InversionError):
        gil_pelaez_sf(S.log_cf, 3.0, S.theta_max(), tol=1e-300, limit=5)


def test_ks_against_own_quantiles_is_small():
    # deterministic "sample": stable quantiles on a midpoint grid
    u = (np.arange(400) + 0.5) / 400
    xs = np.linspace(-15, 300, 20000)
    q = np.interp(u, cdf_grid(S, xs), xs)
    assert ks_one_sample(S, q) < 0.01


@pytest.mark.parametrize("bad", [lambda: StableSpec(1.0, 2.0), lambda: StableSpec(0.0, 1.5)])
def test_invalid(bad):
    with pytest.raises(DomainError):
        bad()
