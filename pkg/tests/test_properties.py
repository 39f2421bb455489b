"""Property-based checks of the deterministic building blocks."""

import math

import numpy as np
from hypothesis import assume, given
from hypothesis import strategies as st

from telecom_lde.distributions import Pareto, TruncatedPareto, Uniform
from telecom_lde.errors import CriticalCaseError
from telecom_lde.lde import intermediate_constant_1, required_sessions, wilson_interval
from telecom_lde.measures import TailMeasure, TelecomParams, kernel_ell, mu_ell_atom, mu_ell_tail
from telecom_lde.rng import Purpose, stream_keys, uniforms_at
from telecom_lde.stable import StableSpec, cf

gammas = st.floats(1.05, 1.95)
pos = st.floats(1e-3, 1e3)
laws = st.one_of(
    st.builds(Uniform, st.floats(0.1, 10.0)),
    st.builds(Pareto, st.floats(1.6, 5.0), st.floats(0.1, 3.0)),
    st.builds(lambda a, lo, w: TruncatedPareto(a, lo, lo * (1.0 + w)), st.floats(0.5, 3.0), st.floats(0.1, 2.0), st.floats(0.1, 10.0)),
)


@given(st.floats(-50, 50), st.floats(0.0, 50), st.floats(0.01, 50))
def test_kernel_is_an_overlap_length(s, u, t):
    k = kernel_ell(s, u, t)
    assert 0.0 <= k <= min(u, t) + 1e-12


@given(gammas, pos, st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_overlap_tail_monotone(g, t, a, b):
    lo, hi = sorted((a * t, b * t))
    assert mu_ell_tail(t, g, lo) >= mu_ell_tail(t, g, hi) >= mu_ell_atom(t, g) * (1 - 1e-12)


@given(laws, st.floats(0.0, 2.5), st.floats(0.0, 20.0), st.floats(0.0, 20.0))
def test_partial_moment_is_additive(law, p, a, b):
    lo, mid = sorted((a, b))
    whole = law.partial_moment(p, lo, np.inf)
    parts = law.partial_moment(p, lo, mid) + law.partial_moment(p, mid, np.inf)
    assert math.isclose(whole, parts, rel_tol=1e-9, abs_tol=1e-13)


@given(laws, gammas, st.floats(0.5, 1e4), st.floats(1e-3, 1e3))
def test_tail_below_bound(law, g, t, v):
    assume(law.delta > g)
    m = TailMeasure(t, TelecomParams(1.0, g), law)
    assert m.tail(v) <= m.tail_bound(v) * (1 + 1e-10)


@given(st.integers(0, 500), st.integers(1, 500))
def test_wilson_contains_estimate(k, n):
    assume(k <= n)
    lo, hi = wilson_interval(k, n)
    assert 0.0 <= lo <= k / n <= hi <= 1.0


@given(st.integers(0, 2**62), st.integers(0, 2**40), st.sampled_from(list(Purpose)))
def test_uniforms_open_interval(seed, counter, purpose):
    u = uniforms_at(stream_keys(seed, [0, 1], purpose), np.array([counter, counter], dtype=np.uint64))
    assert np.all((u > 0) & (u < 1))


@given(st.floats(0.1, 10.0), st.floats(0.05, 7.0))
def test_required_sessions_can_reach_level(b, kappa):
    try:
        sc = required_sessions(Uniform(b), kappa)
    except CriticalCaseError:
        assert math.isclose(kappa / b, round(kappa / b)) and kappa / b >= 1
        return
    assert sc.n * b >= kappa and (sc.n - 1) * b < kappa
    assert 0.0 <= sc.s_star <= sc.s_min <= 1.0


@given(gammas, st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_one_session_constant_decreasing(g, a, b):
    lo, hi = sorted((a, b))
    assume(hi - lo > 1e-6)
    assert intermediate_constant_1(g, Uniform(1.0), lo) > intermediate_constant_1(g, Uniform(1.0), hi)


@given(st.floats(0.1, 10.0), gammas, st.floats(-30, 30))
def test_stable_cf_in_unit_disk(q, g, th):
    z = cf(StableSpec(q, g), th)
    assert abs(z) <= 1.0 + 1e-15
