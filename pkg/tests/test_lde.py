import math

import numpy as np
import pytest

from telecom_lde.distributions import Degenerate, Pareto, Uniform
from telecom_lde.errors import ConfigurationError, CriticalCaseError, DomainError
from telecom_lde.lde import (
    TailEstimate,
    exact_tail_probability,
    intermediate_constant_1,
    intermediate_constant_n,
    moderate_asymptotic,
    required_sessions,
    tail_estimate_conditional,
    tail_estimate_crude,
    ultra_asymptotic,
    ultra_constant,
    wilson_interval,
)
from telecom_lde.measures import TailMeasure, TelecomParams
from telecom_lde.simulator import SplitConfig

G = 1.5
P1 = TelecomParams(1.0, G)
U01 = Uniform(1.0)


class TestConstants:
    def test_moderate(self):
        assert moderate_asymptotic(1.0, G, U01.moment(G), 1e6, 1e5) == pytest.approx(8.433e-3, abs=1e-6)
        with pytest.raises(DomainError):
            moderate_asymptotic(1.0, G, 0.4, -1.0, 1.0)

    def test_one_session(self):
        assert intermediate_constant_1(G, U01, 0.5) == pytest.approx(1.027231, abs=1e-6)
        for kappa in (0.25, 0.5, 0.75):
            quad = intermediate_constant_n(G, U01, kappa, n=1, method="quad").value
            assert intermediate_constant_1(G, U01, kappa) == pytest.approx(quad, rel=1e-8)
        # decreasing in the level
        d = [intermediate_constant_1(G, U01, k) for k in (0.1, 0.3, 0.6, 0.9)]
        assert np.all(np.diff(d) < 0)

    def test_one_session_domain(self):
        with pytest.raises(DomainError):
            intermediate_constant_1(G, U01, 1.5)
        with pytest.raises(DomainError):
            intermediate_constant_1(G, Degenerate(1.0), 1.0)

    def test_ultra(self):
        assert ultra_constant(3.0, G) == pytest.approx(6.0 / 2.8125)
        assert ultra_asymptotic(1.0, G, Pareto(3.0, 1.0), 100.0, 1e4) == pytest.approx(2.133333e-7, abs=1e-12)
        with pytest.raises(DomainError):
            ultra_constant(1.2, G)
        with pytest.raises(DomainError):
            ultra_asymptotic(1.0, G, U01, 10.0, 5.0)

    def test_two_sessions_quad_and_mc(self):
        d2 = intermediate_constant_n(G, U01, 1.5, n=2, method="quad").value
        assert d2 == pytest.approx(0.180153, abs=1e-6)
        mc = intermediate_constant_n(G, U01, 1.5, n=2, replicates=200_000, seed=3)
        assert mc.ci_low <= d2 <= mc.ci_high

    def test_unbounded_reward_multi_session(self):
        with pytest.raises(DomainError):
            intermediate_constant_n(G, Pareto(3.0, 1.0), 0.5, n=2)
        # one session: only quadrature (no positive cutoff)
        with pytest.raises(DomainError):
            intermediate_constant_n(G, Pareto(3.0, 1.0), 0.5, n=1)
        q = intermediate_constant_n(G, Pareto(3.0, 1.0), 2.0, n=1, method="quad").value
        assert q == pytest.approx(intermediate_constant_1(G, Pareto(3.0, 1.0), 2.0), rel=1e-8)

    def test_unknown_method(self):
        with pytest.raises(ConfigurationError):
            intermediate_constant_n(G, U01, 0.5, n=1, method="simpson")


class TestRequiredSessions:
    def test_examples(self):
        assert required_sessions(U01, 0.5).n == 1
        sc = required_sessions(U01, 1.5)
        assert (sc.n, sc.zeta, sc.eta, sc.s_star, sc.s_min) == pytest.approx((2, 0.75, 0.3, 0.25, 0.5))
        assert required_sessions(Pareto(3.0, 1.0), 50.0).n == 1
        assert required_sessions(Degenerate(1.0), 2.0).n == 2

    def test_critical_case(self):
        with pytest.raises(CriticalCaseError):
            required_sessions(U01, 2.0)
        with pytest.raises(DomainError):
            required_sessions(U01, 0.0)


def test_wilson_interval():
    # endpoints solve the score equation (p_hat - p)^2 = z^2 p (1 - p) / n
    z = 1.959963984540054
    for k, n in ((5, 100), (37, 250)):
        lo, hi = wilson_interval(k, n)
        for p in (lo, hi):
            assert (k / n - p) ** 2 == pytest.approx(z * z * p * (1 - p) / n, rel=1e-10)
    assert wilson_interval(5, 100) == pytest.approx((0.021544, 0.111750), abs=1e-6)
    assert wilson_interval(0, 100)[0] == 0.0 and wilson_interval(100, 100)[1] == 1.0
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


def test_estimate_rejects_inconsistent_interval():
    with pytest.raises(ValueError):
        TailEstimate(0.5, 0.6, 0.7, 10, "crude", 0)


class TestEstimators:
    m = TailMeasure(100.0, P1, U01)
    split = SplitConfig.from_h(0.1, 100.0)

    def test_crude_edges(self):
        e = tail_estimate_crude(self.m, 1.0, self.split, 1e6, 500, 1)
        assert e.p_hat == 0.0 and e.ci_low == 0.0 and 0 < e.ci_high < 0.01
        assert tail_estimate_crude(self.m, 1.0, self.split, -1e6, 500, 1).p_hat == 1.0
        with pytest.raises(ConfigurationError):
            tail_estimate_crude(self.m, 1.0, self.split, 1.0, 0, 1)

    def test_conditional_against_exact(self):
        exact = exact_tail_probability(self.m, 150.0)
        assert exact == pytest.approx(0.002192, rel=2e-3)
        e = tail_estimate_conditional(self.m, 1.0, self.split, 150.0, 5000, 1)
        assert e.ci_low <= exact <= e.ci_high
        assert e.rel_halfwidth < 0.1
        assert e.diagnostics["symmetrized"] and e.diagnostics["remainder"] <= 0.01 * e.p_hat

    def test_conditional_with_atoms(self):
        m = TailMeasure(100.0, P1, Degenerate(1.0))
        e = tail_estimate_conditional(m, 1.0, self.split, 80.0, 5000, 2)
        assert not e.diagnostics["symmetrized"]
        assert e.ci_low <= exact_tail_probability(m, 80.0) <= e.ci_high

    def test_conditional_deterministic(self):
        a = tail_estimate_conditional(self.m, 1.0, self.split, 120.0, 500, 4)
        b = tail_estimate_conditional(self.m, 1.0, self.split, 120.0, 500, 4)
        assert a == b and a.p_hat > 0
        assert tail_estimate_conditional(self.m, 1.0, self.split, 120.0, 500, 5).p_hat != a.p_hat

    def test_conditional_n_max_too_small(self):
        with pytest.raises(ConfigurationError):
            tail_estimate_conditional(self.m, 1.0, self.split, 300.0, 200, 1, n_max=0)
        with pytest.raises(ConfigurationError):
            tail_estimate_conditional(self.m, 1.0, self.split, 300.0, 0, 1)

    def test_no_big_jumps_possible(self):
        # v0 beyond the support: only the small part contributes
        m = TailMeasure(10.0, P1, U01)
        e = tail_estimate_conditional(m, 1.0, SplitConfig(20.0), 5.0, 2000, 1)
        c = tail_estimate_crude(m, 1.0, SplitConfig(20.0), 5.0, 2000, 1)
        assert e.diagnostics["n_max"] == 0 and math.isclose(e.p_hat, c.p_hat)
