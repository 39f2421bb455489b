"""The ten acceptance criteria, one test each.

Tolerances are fixed; seeds were fixed before the first run.  Each test prints a
PASS/FAIL line that is repeated in the terminal summary.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from telecom_lde.distributions import Degenerate, Pareto, ParetoDuration, Uniform
from telecom_lde.experiments import measure_identities
from telecom_lde.lde import (
    intermediate_constant_1,
    intermediate_constant_n,
    moderate_asymptotic,
    tail_estimate_conditional,
    tail_estimate_crude,
    ultra_asymptotic,
)
from telecom_lde.measures import TailMeasure, TelecomParams
from telecom_lde.simulator import (
    ServiceSystemParams,
    SplitConfig,
    bound_constants,
    centering_Et,
    chernoff_bound,
    chernoff_bound_exact,
    exp_moment_small,
    simulate_small_part,
    simulate_telecom_batch,
    simulate_Z_a,
)
from telecom_lde.stable import StableSpec, cdf, cf, ks_one_sample, log_cf_quad

SEED = 2024
G = 1.5
U01 = Uniform(1.0)
P1 = TelecomParams(1.0, G)

# frozen oracle values (1-D / 2-D quadrature, independent of the closed forms)
D1_HALF = 1.027231
D2_THREE_HALVES = 0.180153


def test_c01_measure_identities(report):
    t0 = time.perf_counter()
    checks = {c["name"]: c for c in measure_identities()}
    elapsed = time.perf_counter() - t0
    want = ["ell_tail_vs_density", "nu_vs_ell_t1", "tail_bound_uniform", "tail_bound_degenerate",
            "tail_bound_pareto3", "tail_asymptotic_ratio"]
    ok = all(checks[w]["ok"] for w in want)
    detail = (f"density diff {checks['ell_tail_vs_density']['value']:.1e}, nu diff {checks['nu_vs_ell_t1']['value']:.1e}, "
              f"max tail/bound {max(checks[w]['value'] for w in want[2:5]):.3f}, "
              f"asymptotic ratio {checks['tail_asymptotic_ratio']['value']:.4f} ({elapsed:.2f}s)")
    assert report(1, ok, detail)


def test_c02_stable_law(report):
    spec = StableSpec(1.0, G)
    theta = np.linspace(-10.0, 10.0, 20)
    diff = max(abs(cf(spec, th) - np.exp(log_cf_quad(spec, th))) for th in theta)
    ratio = (1.0 - cdf(spec, 50.0)) * 50.0**G * G / spec.Q
    ok = diff <= 1e-8 and 0.9 <= ratio <= 1.1
    assert report(2, ok, f"max |cf - quadrature| {diff:.2e} (<= 1e-8); tail ratio at x=50 {ratio:.4f} in [0.9, 1.1]")


@pytest.mark.slow
def test_c03_stable_limit(report):
    t, N = 1e4, 10_000
    m = TailMeasure(t, P1, U01)
    b = simulate_telecom_batch(m, SplitConfig.from_h(0.1, t), SEED, N)
    x = b.value / (U01.moment(G) * t) ** (1.0 / G)
    ks = ks_one_sample(StableSpec(1.0, G), x)
    assert report(3, ks <= 0.02, f"one-sample KS {ks:.4f} (<= 0.02), N={N}, t={t:g}")


@pytest.mark.slow
def test_c04_prelimit_convergence(report):
    N = 10_000
    p = ServiceSystemParams.critical(1.0, 1e4, ParetoDuration(G, 1.0), U01)
    z = simulate_Z_a(p, [1.0], SEED, N)[:, 0]
    tp = p.telecom_params()
    y = simulate_telecom_batch(TailMeasure(1.0, tp, U01), SplitConfig.from_h(0.1, 1.0), SEED, N).value
    ks = stats.ks_2samp(z, y).statistic
    assert report(4, ks <= 0.03, f"two-sample KS Z_a(1) vs Y(1) {ks:.4f} (<= 0.03), a=1e4, Q={tp.Q:g}")


@pytest.mark.slow
def test_c05_moderate(report):
    t, rho = 1e6, 1e5
    m = TailMeasure(t, P1, U01)
    est = tail_estimate_conditional(m, 1.0, SplitConfig.from_h(0.1, rho), rho, 20_000, SEED)
    theory = moderate_asymptotic(1.0, G, U01.moment(G), t, rho)
    r = est.p_hat / theory
    ok = 0.75 <= r <= 1.25 and abs(theory - 8.433e-3) < 1e-6
    assert report(5, ok, f"p_hat {est.p_hat:.4e} / theory {theory:.4e} = {r:.3f} in [0.75, 1.25]")


@pytest.mark.slow
def test_c06_intermediate_one_session(report):
    ts = (1e2, 1e3, 1e4)
    scaled = []
    for t in ts:
        m = TailMeasure(t, P1, U01)
        est = tail_estimate_conditional(m, 1.0, SplitConfig.from_h(0.1, t), 0.5 * t, 20_000, SEED)
        scaled.append(est.p_hat * t ** (G - 1.0))
    d1 = intermediate_constant_1(G, U01, 0.5)
    r = scaled[-1] / (1.0 * d1)
    flat = max(scaled) / min(scaled)
    ok = abs(d1 - D1_HALF) < 1e-6 and 0.8 <= r <= 1.2 and flat <= 1.2
    detail = f"p*t^0.5 = {', '.join(f'{s:.4f}' for s in scaled)}; ratio at t=1e4 {r:.3f} in [0.8, 1.2]; max/min {flat:.3f} <= 1.2"
    assert report(6, ok, detail)


@pytest.mark.slow
def test_c07_intermediate_two_sessions(report):
    ts = np.array([50.0, 100.0, 200.0])
    d2 = intermediate_constant_n(G, U01, 1.5, n=2, method="quad").value
    p = []
    for t in ts:
        m = TailMeasure(t, P1, U01)
        p.append(tail_estimate_conditional(m, 1.0, SplitConfig.from_h(0.1, t), 1.5 * t, 20_000, SEED).p_hat)
    p = np.array(p)
    slope = np.polyfit(np.log(ts), np.log(p), 1)[0]
    ratios = p * ts / d2
    ok = abs(d2 - D2_THREE_HALVES) < 1e-6 and abs(slope + 1.0) <= 0.15 and np.all((ratios >= 0.7) & (ratios <= 1.3))
    detail = f"slope {slope:.3f} in [-1.15, -0.85]; p*t/D2 = {', '.join(f'{x:.3f}' for x in ratios)} in [0.7, 1.3]"
    assert report(7, ok, detail)


@pytest.mark.slow
def test_c08_ultra(report):
    law = Pareto(3.0, 1.0)
    t, rho = 100.0, 1e4
    m = TailMeasure(t, P1, law)
    est = tail_estimate_conditional(m, 1.0, SplitConfig.from_h(0.1, t), rho, 20_000, SEED)
    theory = ultra_asymptotic(1.0, G, law, t, rho)
    r = est.p_hat / theory
    ok = abs(theory - 2.133333e-7) < 1e-12 and 0.7 <= r <= 1.3
    assert report(8, ok, f"p_hat {est.p_hat:.4e} / theory {theory:.4e} = {r:.3f} in [0.7, 1.3]")


@pytest.mark.slow
def test_c09_decomposition_bounds(report):
    notes, ok = [], True
    N = 20_000
    # variance and centering bounds
    for t, v0 in ((10.0, 1.0), (100.0, 10.0), (1000.0, 100.0)):
        m = TailMeasure(t, P1, U01)
        c = bound_constants(m, 1.0)
        y = simulate_small_part(m, 1.0, SplitConfig(v0), SEED, N)
        var_low = (N - 1) * y.var(ddof=1) / stats.chi2.ppf(0.99, N - 1)
        vb = c["D2"] * t * v0 ** (2.0 - G)
        e = centering_Et(m, 1.0, v0)
        eb = c["D1"] * t * v0 ** (1.0 - G)
        ok &= var_low <= vb and 0.0 <= e <= eb
        notes.append(f"t={t:g}: var {var_low:.3g}<={vb:.3g}, E_t {e:.3g}<={eb:.3g}")
    # exponential moment
    m = TailMeasure(10.0, P1, Degenerate(1.0))
    lam, Nexp = 0.5, 100_000
    y = simulate_small_part(m, 1.0, SplitConfig(1.0), SEED, Nexp)
    ey = np.exp(lam * y)
    mc = ey.mean()
    se_log = ey.std(ddof=1) / (mc * math.sqrt(Nexp))
    closed = exp_moment_small(m, 1.0, 1.0, lam)
    z = abs(math.log(mc) - math.log(closed)) / se_log
    ok &= z <= 3.0
    notes.append(f"exp moment z={z:.2f}<=3")
    # Chernoff bound against the empirical frequency
    for t in (10.0, 100.0):
        m = TailMeasure(t, P1, U01)
        v0, y_lvl = 0.1 * t, 0.5 * t
        y = simulate_small_part(m, 1.0, SplitConfig(v0), SEED, N)
        k = int(np.count_nonzero(y >= y_lvl))
        low = stats.beta.ppf(0.01, k, N - k + 1) if k else 0.0
        b1, b2 = chernoff_bound(m, 1.0, v0, y_lvl), chernoff_bound_exact(m, 1.0, v0, y_lvl)
        ok &= b1 >= low and b2 >= low
        notes.append(f"t={t:g}: freq {k / N:.2e} vs bounds {b1:.3g}/{b2:.3g}")
    assert report(9, bool(ok), "; ".join(notes))


@pytest.mark.slow
def test_c10_consistency(report):
    d1 = intermediate_constant_1(G, U01, 0.5)
    mc = intermediate_constant_n(G, U01, 0.5, n=1, replicates=10**6, seed=SEED)
    qd = intermediate_constant_n(G, U01, 0.5, n=1, method="quad").value
    t, rho = 1e3, 500.0
    m = TailMeasure(t, P1, U01)
    split = SplitConfig.from_h(0.1, t)
    crude = tail_estimate_crude(m, 1.0, split, rho, 20_000, SEED)
    cond = tail_estimate_conditional(m, 1.0, split, rho, 20_000, SEED + 1)
    ok = mc.ci_low <= d1 <= mc.ci_high and abs(qd - d1) <= 1e-6 and crude.overlaps(cond)
    detail = (f"D1 {d1:.6f} in MC CI [{mc.ci_low:.6f}, {mc.ci_high:.6f}], |quad - D1| {abs(qd - d1):.1e}; "
              f"crude [{crude.ci_low:.5f}, {crude.ci_high:.5f}] vs conditional [{cond.ci_low:.5f}, {cond.ci_high:.5f}]")
    assert report(10, ok, detail)
