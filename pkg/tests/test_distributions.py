import math

import numpy as np
import pytest
from scipy import stats

from telecom_lde.distributions import (
    Degenerate,
    DiscreteMixture,
    Pareto,
    ParetoDuration,
    TruncatedPareto,
    Uniform,
    duration_from_record,
    law_to_record,
    reward_from_record,
)
from telecom_lde.errors import DomainError
from telecom_lde.measures import quad

CONTINUOUS = [Uniform(1.0), Uniform(2.5), Pareto(3.0, 1.0), Pareto(2.5, 0.5), TruncatedPareto(1.2, 0.5, 4.0)]
ALL = CONTINUOUS + [Degenerate(1.0), DiscreteMixture((0.5, 1.0, 2.0), (0.2, 0.5, 0.3))]


@pytest.mark.parametrize("law", CONTINUOUS, ids=lambda l: repr(l))
def test_inverse_cdf_samples_match_tail(law):
    u = np.random.default_rng(7).random(100_000)
    x = law.ppf(u)
    ks = stats.kstest(x, lambda z: 1.0 - law.tail(z)).statistic
    assert ks < 0.01


@pytest.mark.parametrize("law", ALL, ids=lambda l: repr(l))
def test_partial_moment_matches_quadrature(law):
    for p in (0.5, 1.0, 1.5):
        for lo, hi in ((0.0, np.inf), (0.7, 1.8), (1.2, np.inf)):
            closed = law.partial_moment(p, lo, hi)
            oracle = law.expect(lambda r: r**p, lo, hi)
            assert closed == pytest.approx(oracle, rel=1e-8, abs=1e-14)


@pytest.mark.parametrize("law", ALL, ids=lambda l: repr(l))
def test_truncated_moment_monotone(law):
    ks = np.linspace(0.0, 3.0, 31)
    vals = np.array([law.truncated_moment(1.5, k) for k in ks])
    assert np.all(np.diff(vals) <= 1e-15)
    below = law.truncated_moment(1.5, 0.0) - vals
    assert np.all(below >= -1e-15)


@pytest.mark.parametrize("law", CONTINUOUS, ids=lambda l: repr(l))
def test_tilted_ppf_inverts_tilted_cdf(law):
    p, lo, hi = 1.5, 0.6, 2.0
    lo = max(lo, law.support()[0])
    mass = law.partial_moment(p, lo, hi)
    for u in (0.1, 0.5, 0.9):
        x = float(law.tilted_ppf(p, lo, hi, u))
        assert lo <= x <= hi
        assert law.partial_moment(p, lo, x) / mass == pytest.approx(u, rel=1e-9)


def test_pareto_regular_variation():
    law = Pareto(3.0, 1.0)
    x = np.array([1.0, 2.0, 10.0, 1e3])
    for lam in (2.0, 5.0):
        np.testing.assert_allclose(law.tail(lam * x) / law.tail(x), lam**-3.0, rtol=1e-13)
    assert law.tail_index == 3.0
    assert law.moment(1.5) == pytest.approx(2.0)


def test_tail_is_right_continuous_and_inclusive():
    d = DiscreteMixture((1.0, 2.0), (0.25, 0.75))
    assert d.tail(2.0) == pytest.approx(0.75)
    assert d.tail(2.0 + 1e-12) == 0.0
    assert d.has_atom_at(1.0) and not d.has_atom_at(1.5)
    assert Degenerate(1.0).tail(1.0) == 1.0


def test_ess_sup_and_delta():
    assert Uniform(2.0).ess_sup == 2.0
    assert math.isinf(Pareto(3.0, 1.0).ess_sup)
    assert Uniform(1.0).delta == 2.0
    assert Pareto(1.2, 1.0).delta == 1.2


def test_infinite_moment_raises():
    with pytest.raises(DomainError):
        Pareto(1.2, 1.0).moment(1.5)


@pytest.mark.parametrize("bad", [
    lambda: Uniform(0.0), lambda: Pareto(-1.0, 1.0), lambda: TruncatedPareto(1.0, 2.0, 1.0),
    lambda: DiscreteMixture((1.0,), (0.5,)), lambda: ParetoDuration(2.0),
])
def test_invalid_parameters(bad):
    with pytest.raises(DomainError):
        bad()


@pytest.mark.parametrize("law", ALL + [ParetoDuration(1.5, 2.0)], ids=lambda l: repr(l))
def test_record_round_trip(law):
    rec = law_to_record(law)
    back = duration_from_record(rec) if isinstance(law, ParetoDuration) else reward_from_record(rec)
    assert back == law


def test_unknown_record_keys():
    with pytest.raises(DomainError):
        reward_from_record({"kind": "uniform", "b": 1.0, "c": 2.0})
    with pytest.raises(DomainError):
        reward_from_record({"kind": "lognormal"})


class TestParetoDuration:
    d = ParetoDuration(1.5, 2.0)

    def test_constants(self):
        assert self.d.c_U == pytest.approx(2.0**1.5)
        assert self.d.mean == pytest.approx(6.0)
        tail = lambda u: float(self.d.tail(u))
        assert quad(tail, 0.0, 2.0) + quad(tail, 2.0, np.inf) == pytest.approx(self.d.mean, rel=1e-8)

    def test_backward_ppf_matches_stationary_excess_law(self):
        # P(X <= x) = integral_0^x P(U > y) dy / E U
        for x in (0.5, 2.0, 7.0, 50.0):
            cdf = quad(lambda y: float(self.d.tail(y)), 0.0, x) / self.d.mean
            assert float(self.d.backward_ppf(cdf)) == pytest.approx(x, rel=1e-9)

    def test_residual_ppf(self):
        for x in (0.5, 3.0):
            for w in (0.2, 0.8):
                u = float(self.d.residual_ppf(x, w))
                cond = 1.0 - float(self.d.tail(u)) / float(self.d.tail(x))
                assert u >= x and cond == pytest.approx(w, rel=1e-12)
