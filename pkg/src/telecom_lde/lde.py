"""Large-deviation constants and rare-event estimators of ``P(Y(t) >= rho)``.

Regimes (``rho`` against ``t``):

* moderate, ``t^(1/gamma) << rho << t``: ``P ~ (Q E R^gamma / gamma) t rho^(-gamma)``;
* intermediate, ``rho = kappa t``: ``P ~ Q^n D_n(kappa) t^(-(gamma-1) n)`` where ``n``
  is the least number of sessions able to produce the excess;
* ultralarge, ``rho >> t`` with regularly varying rewards of index ``m``:
  ``P ~ Q D t^(-(gamma-1)) P(R >= rho / t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from . import kernels
from .distributions import RewardLaw, Uniform
from .errors import ConfigurationError, CriticalCaseError, DomainError
from .measures import NuMeasure, TailMeasure, check_gamma
from .rng import Purpose, stream_keys, uniforms_at
from .simulator import BandSampler, ResolvedSplit, SplitConfig, _small_part, simulate_telecom_batch
from .stable import StableSpec, gil_pelaez_sf

Z95 = stats.norm.ppf(0.975)


@dataclass(frozen=True)
class TailEstimate:
    """Monte-Carlo probability with a 95% interval."""

    p_hat: float
    ci_low: float
    ci_high: float
    replicates: int
    method: str
    seed: int
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (0.0 <= self.ci_low <= self.p_hat <= self.ci_high <= 1.0):
            raise ValueError(f"inconsistent estimate {self.p_hat} in [{self.ci_low}, {self.ci_high}]")

    @property
    def rel_halfwidth(self):
        return 0.5 * (self.ci_high - self.ci_low) / self.p_hat if self.p_hat > 0 else math.inf

    def overlaps(self, other: "TailEstimate"):
        return self.ci_low <= other.ci_high and other.ci_low <= self.ci_high


@dataclass(frozen=True)
class ConstantEstimate:
    """Monte-Carlo or quadrature value of a constant with a 95% interval."""

    value: float
    ci_low: float
    ci_high: float
    replicates: int
    method: str

    @property
    def rel_halfwidth(self):
        return 0.5 * (self.ci_high - self.ci_low) / self.value if self.value > 0 else math.inf


def wilson_interval(k, n, z=Z95):
    """Wilson score interval for ``k`` successes out of ``n``."""
    if n <= 0:
        raise ValueError("need n >= 1")
    p = k / n
    den = 1.0 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, min(p, mid - half)), min(1.0, max(p, mid + half))


# ----------------------------------------------------------------------------
# closed-form constants
# ----------------------------------------------------------------------------


def moderate_constant(Q, gamma, reward_moment):
    return Q * reward_moment / gamma


def moderate_asymptotic(Q, gamma, reward_moment, t, rho):
    """``(Q E R^gamma / gamma) t rho^(-gamma)``."""
    check_gamma(gamma)
    if not (Q > 0 and reward_moment > 0 and t > 0 and rho > 0):
        raise DomainError("parameters must be positive")
    return moderate_constant(Q, gamma, reward_moment) * t * rho ** (-gamma)


def intermediate_constant_1(gamma, reward: RewardLaw, kappa):
    """One-session constant ``D_1(kappa)``.

    ``kappa^(-gamma) / gamma E(R^gamma; R >= kappa)
    + (2 - gamma) kappa^(1-gamma) / ((gamma - 1) gamma) E(R^(gamma-1); R >= kappa)``.
    """
    check_gamma(gamma)
    if not kappa > 0:
        raise DomainError("kappa must be positive")
    if not reward.tail(kappa) > 0:
        raise DomainError(f"P(R >= {kappa}) = 0: a single session cannot reach the level")
    if reward.has_atom_at(kappa):
        raise DomainError(f"reward has an atom at kappa = {kappa}; the constant is not covered")
    g = gamma
    a = kappa**-g / g * reward.truncated_moment(g, kappa)
    b = (2.0 - g) * kappa ** (1.0 - g) / ((g - 1.0) * g) * reward.truncated_moment(g - 1.0, kappa)
    return float(a + b)


def ultra_constant(m, gamma):
    """``m (m - 1) / (gamma (gamma - 1) (m - gamma + 1) (m - gamma))``."""
    check_gamma(gamma)
    if not m > gamma:
        raise DomainError("need m > gamma")
    return m * (m - 1.0) / (gamma * (gamma - 1.0) * (m - gamma + 1.0) * (m - gamma))


def ultra_asymptotic(Q, gamma, reward: RewardLaw, t, rho):
    """``Q D t^(-(gamma-1)) P(R >= rho / t)``."""
    m = reward.tail_index
    if m is None:
        raise DomainError(f"{reward.kind} reward has no regular-variation index")
    return Q * ultra_constant(m, gamma) * t ** (-(gamma - 1.0)) * float(reward.tail(rho / t))


@dataclass(frozen=True)
class SessionCount:
    """Least number ``n`` of sessions that can produce a workload excess ``kappa t``.

    ``zeta`` solves ``P(R >= kappa / (n - zeta)) = 0`` (midpoint of the feasible
    range), ``eta = (1 - zeta) kappa / (n - zeta)``, ``s_star = (n-1) eta / (kappa - eta)``
    and ``s_min >= s_star`` is the overlap fraction below which a session
    cannot take part in an excess.
    """

    n: int
    eta: float
    zeta: float
    s_star: float
    s_min: float


def required_sessions(reward: RewardLaw, kappa):
    if not kappa > 0:
        raise DomainError("kappa must be positive")
    S = reward.ess_sup
    if not math.isfinite(S):
        return SessionCount(n=1, eta=kappa, zeta=math.nan, s_star=0.0, s_min=0.0)
    ratio = kappa / S
    n = max(1, math.ceil(ratio))
    if not reward.tail(kappa / n) > 0:
        n += 1
    lo = max(n - ratio, 0.0)
    if lo >= 1.0:
        raise CriticalCaseError(
            f"kappa / ess_sup(R) = {ratio:g} is an integer and P(R = ess_sup) = 0; only zeta = 1 works"
        )
    zeta = 0.5 * (lo + 1.0)
    eta = (1.0 - zeta) * kappa / (n - zeta)
    s_star = (n - 1) * eta / (kappa - eta) if n > 1 else 0.0
    # n - 1 full sessions bring at most (n - 1) S, so the last one needs s S >= kappa - (n - 1) S
    s_min = max(s_star, ratio - (n - 1))
    return SessionCount(n=n, eta=eta, zeta=zeta, s_star=s_star, s_min=s_min)


# ----------------------------------------------------------------------------
# n-session constant
# ----------------------------------------------------------------------------


def nu_sample(gamma, s_min, u):
    """Draws from ``nu`` restricted to ``[s_min, 1]`` (atom at 1 included)."""
    return kernels.ell_inverse(1.0, gamma, np.full(np.shape(u), s_min), np.full(np.shape(u), np.inf), u)


def uniform_pair_prob(s1, s2, b, c):
    """``P(s1 X + s2 Y >= c)`` for independent ``X, Y`` uniform on ``[0, b]``."""
    A, B = s1 * b, s2 * b
    p = lambda x: np.maximum(x, 0.0) ** 2
    cdf_area = (p(c) - p(c - A) - p(c - B) + p(c - A - B)) / (2.0 * A * B)
    return np.clip(1.0 - cdf_area, 0.0, 1.0)


def intermediate_constant_n(gamma, reward: RewardLaw, kappa, n=None, replicates=10**6, seed=0, method="mc", chunk=1 << 20):
    """``D_n(kappa) = (1/n!) integral_{[0,1]^n} P(s_1 R_1 + ... + s_n R_n >= kappa) prod nu(ds_m)``.

    ``method="mc"`` samples each ``s_m`` from ``nu`` restricted to ``[s_min, 1]``
    and uses the closed-form inner probability for ``n = 2`` uniform rewards,
    sampled rewards otherwise.  ``method="quad"`` integrates deterministically
    (``n <= 2``).
    """
    check_gamma(gamma)
    sc = required_sessions(reward, kappa)
    n = sc.n if n is None else int(n)
    if n < 1:
        raise DomainError("n must be >= 1")
    if n >= 2 and not math.isfinite(reward.ess_sup):
        raise DomainError("unbounded rewards with n >= 2: no positive cutoff s_star exists")
    nu = NuMeasure(gamma)
    S = reward.ess_sup
    s_min = max(sc.s_min if n == sc.n else 0.0, kappa / S - (n - 1)) if math.isfinite(S) else 0.0
    s_min = min(max(s_min, 0.0), 1.0)
    if method == "quad":
        return _constant_quad(nu, reward, kappa, n, s_min)
    if method != "mc":
        raise ConfigurationError(f"unknown method {method!r}")
    if not s_min > 0:
        raise DomainError("Monte Carlo needs a positive cutoff; use method='quad'")
    mass = float(nu.tail(s_min))
    scale = mass**n / math.factorial(n)
    closed = n == 2 and isinstance(reward, Uniform)
    k_s = stream_keys(seed, 0, Purpose.NU)[0]
    k_r = stream_keys(seed, 0, Purpose.REWARD)[0]
    total, total_sq = 0.0, 0.0
    for start in range(0, replicates, chunk):
        size = min(chunk, replicates - start)
        cnt = (np.arange(start * n, (start + size) * n, dtype=np.uint64))
        s = nu_sample(gamma, s_min, uniforms_at(np.full(cnt.size, k_s, dtype=np.uint64), cnt)).reshape(size, n)
        if closed:
            h = uniform_pair_prob(s[:, 0], s[:, 1], reward.b, kappa)
        else:
            r = np.asarray(reward.ppf(uniforms_at(np.full(cnt.size, k_r, dtype=np.uint64), cnt))).reshape(size, n)
            h = (np.sum(s * r, axis=1) >= kappa).astype(float)
        total += h.sum()
        total_sq += np.dot(h, h)
    mean = total / replicates
    if closed:
        var = max(total_sq / replicates - mean * mean, 0.0)
        half = Z95 * math.sqrt(var / replicates)
        lo, hi = max(mean - half, 0.0), min(mean + half, 1.0)
    else:
        lo, hi = wilson_interval(total, replicates)
    return ConstantEstimate(mean * scale, lo * scale, hi * scale, replicates, "mc")


def _constant_quad(nu: NuMeasure, reward, kappa, n, s_min, epsrel=1e-10):
    g = nu.gamma
    atom = nu.atom
    dens = lambda s: float(nu.density(s))
    if n == 1:
        lo = max(s_min, 1e-300)
        pts = None
        if isinstance(reward, Uniform):
            lo = max(lo, kappa / reward.b)
        f = lambda s: float(reward.tail(kappa / s)) * dens(s)
        body = integrate.quad(f, lo, 1.0, epsrel=epsrel, epsabs=0.0, limit=500, points=pts)[0] if lo < 1 else 0.0
        val = body + atom * float(reward.tail(kappa))
        return ConstantEstimate(val, val, val, 0, "quad")
    if n != 2:
        raise DomainError("deterministic quadrature is implemented for n <= 2")
    if isinstance(reward, Uniform):
        inner = lambda s1, s2: float(uniform_pair_prob(s1, s2, reward.b, kappa))
    else:
        inner = lambda s1, s2: reward.expect(lambda r: float(reward.tail((kappa - s1 * r) / s2)) if kappa - s1 * r > 0 else 1.0)
    lo = s_min
    opts = dict(epsabs=1e-13, epsrel=epsrel, limit=200)
    dd = integrate.nquad(lambda s2, s1: inner(s1, s2) * dens(s1) * dens(s2), [[lo, 1.0], [lo, 1.0]], opts=[opts, opts])[0]
    da = integrate.quad(lambda s: inner(s, 1.0) * dens(s), lo, 1.0, **opts)[0]
    aa = inner(1.0, 1.0)
    val = 0.5 * (dd + 2.0 * atom * da + atom * atom * aa)
    return ConstantEstimate(val, val, val, 0, "quad")


# ----------------------------------------------------------------------------
# tail-probability estimators
# ----------------------------------------------------------------------------


def exact_tail_probability(m: TailMeasure, rho, Q=None, tol=1e-7):
    """``P(Y(t) > rho)`` by inverting the exact characteristic function (reference route)."""
    Q = m.Q if Q is None else Q
    spec = StableSpec(Q * m.reward_moment * m.t, m.gamma)
    upper = spec.theta_max(1e-12)
    return gil_pelaez_sf(lambda th: m.log_cf(th, Q=Q), float(rho), upper, tol=tol)


def tail_estimate_crude(m: TailMeasure, Q, split, rho, N, seed):
    """Fraction of ``N`` samples of ``Y(t)`` at or above ``rho``, Wilson interval."""
    if N < 1:
        raise ConfigurationError("N must be >= 1")
    b = simulate_telecom_batch(m, split, seed, N, Q=Q)
    k = int(np.count_nonzero(b.value >= rho))
    lo, hi = wilson_interval(k, N)
    diag = {"hits": k, **b.split.diagnostics()}
    return TailEstimate(k / N, lo, hi, N, "crude", int(seed), diag)


def default_n_max(reward, kappa):
    if not math.isfinite(reward.ess_sup):
        return 2
    try:
        return required_sessions(reward, kappa).n + 1
    except CriticalCaseError:
        return math.ceil(kappa / reward.ess_sup) + 2


def tail_estimate_conditional(m: TailMeasure, Q, split, rho, N, seed, n_max=None, max_terms=60):
    """Estimate ``P(Y >= rho)`` by conditioning on the number of big jumps.

    ``P(Y >= rho) = sum_n P(N0 = n) P(Y° - E_t + V_1 + ... + V_n >= rho)`` with
    ``N0 ~ Poisson(Q mu_lr[v0, inf))`` weighted exactly.  For ``n >= 1`` the
    largest big jump is integrated out (Asmussen-Kroese): with ``M`` the maximum
    of the other ``n - 1`` jumps and ``gap`` the missing amount, the term is
    ``n mu_lr[max(gap, M, v0), inf) / mu_lr[v0, inf)``.  For reward laws with
    atoms (ties among jumps) the last jump is integrated out instead, which is
    unbiased but loses the bounded relative error.  Terms run
    to ``n_max``; ``P(N0 > n_max)`` is reported as ``remainder`` and added to
    the upper confidence limit.
    """
    if N < 1:
        raise ConfigurationError("N must be >= 1")
    rs = split if isinstance(split, ResolvedSplit) else split.resolve(m, Q)
    mu0 = rs.big_rate
    explicit = n_max is not None
    n_cap = n_max if explicit else default_n_max(m.reward, rho / m.t)
    pois = stats.poisson(mu0)
    big = BandSampler(m, rs.v0) if mu0 > 0 else None
    m_v0 = m.tail(rs.v0)
    # symmetrization needs an atomless jump law (no ties among big jumps)
    symmetric = m.reward.atoms[0].size == 0
    terms = []
    n = 0
    p_hat, var = 0.0, 0.0
    while True:
        w = float(pois.pmf(n)) if mu0 > 0 else float(n == 0)
        reps = np.arange(n * N, (n + 1) * N, dtype=np.int64)
        base = _small_part(m, rs, seed, reps) - rs.centering
        if n == 0:
            h = (base >= rho).astype(float)
        else:
            level = np.full(N, rs.v0)
            if n > 1:
                own = np.repeat(reps, n - 1)
                pos = np.tile(np.arange(n - 1, dtype=np.uint64), N)
                keys = [stream_keys(seed, own, pu) for pu in (Purpose.BIG_COMPONENT, Purpose.BIG_R, Purpose.BIG_ELL)]
                v = big.sample(*(uniforms_at(k, pos) for k in keys)).reshape(N, n - 1)
                base = base + v.sum(axis=1)
                if symmetric:
                    level = np.maximum(level, v.max(axis=1))
            level = np.maximum(level, rho - base)
            h = np.asarray(m.tail(level), dtype=float) / m_v0
            if symmetric and n > 1:
                h = n * h
        mean = float(h.mean())
        sd = float(h.std(ddof=1)) if N > 1 else 0.0
        p_hat += w * mean
        var += (w * sd) ** 2 / N
        terms.append({"n": n, "weight": w, "mean": mean, "sd": sd})
        remainder = float(pois.sf(n)) if mu0 > 0 else 0.0
        n += 1
        if n > n_cap:
            if explicit or remainder <= 0.01 * p_hat or n >= max_terms:
                break
        if mu0 == 0:
            break
    if explicit and remainder > 0.1 * p_hat:
        raise ConfigurationError(f"Poisson remainder {remainder:.3g} exceeds 10% of p_hat {p_hat:.3g}; raise n_max")
    half = Z95 * math.sqrt(var)
    p_hat = min(max(p_hat, 0.0), 1.0)
    lo = max(p_hat - half, 0.0)
    hi = min(p_hat + half + remainder, 1.0)
    diag = {"remainder": remainder, "n_max": n - 1, "symmetrized": symmetric, "terms": terms, **rs.diagnostics()}
    return TailEstimate(p_hat, lo, hi, N, "conditional", int(seed), diag)
