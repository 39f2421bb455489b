"""Exact samplers for the pre-limit service system and for the Telecom marginal ``Y(t)``.

``Y(t)`` is the compensated Poisson integral ``integral v (N - Q mu_lr)(dv)``.  It
is assembled from three pieces split at a threshold ``v0``:

* ``small_sum``: compensated jumps in ``[eps, v0)`` simulated exactly, plus a
  residual standing in for the jumps below ``eps`` (Gaussian with the exact
  variance, or dropped);
* ``big_sum``: the uncompensated jumps ``>= v0``;
* ``centering``: ``Q * integral_{[v0, inf)} v mu_lr(dv)``.

so that ``value = small_sum + big_sum - centering``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import interpolate, optimize, special

from . import kernels
from .distributions import ParetoDuration, RewardLaw
from .errors import (
    ConfigurationError,
    DomainError,
    ExponentCapError,
    InversionError,
    RegimeWarning,
    ResourceError,
)
from .measures import TailMeasure, TelecomParams, quad
from .rng import Purpose, segment_counters, stream_keys, uniforms_at


# ----------------------------------------------------------------------------
# pre-limit service system
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ServiceSystemParams:
    """Infinite-source Poisson model observed on ``[0, a]``.

    Parameters
    ----------
    lam : float
        Session arrival intensity per unit time.
    duration : ParetoDuration
        Session length law.
    reward : RewardLaw
        Per-session transmission rate law.
    a : float
        Time scale; the workload is observed at times ``a * t`` for ``t in [0, 1]``.
    max_events : float
        Cap on the expected number of sessions per replicate.
    """

    lam: float
    duration: ParetoDuration
    reward: RewardLaw
    a: float
    max_events: float = 5e7

    def __post_init__(self):
        if self.lam < 0 or not self.a > 0:
            raise DomainError("need lam >= 0 and a > 0")
        if self.reward.delta <= self.duration.gamma:
            warnings.warn(
                f"reward tail index {self.reward.delta} does not exceed the duration index "
                f"{self.duration.gamma}; the Telecom limit does not apply",
                RegimeWarning,
                stacklevel=2,
            )

    @classmethod
    def critical(cls, L, a, duration, reward, **kw):
        """Critical intensity ``lam = L * a^(gamma - 1)``."""
        return cls(lam=L * a ** (duration.gamma - 1.0), duration=duration, reward=reward, a=a, **kw)

    @property
    def gamma(self):
        return self.duration.gamma

    @property
    def L(self):
        return self.lam / self.a ** (self.gamma - 1.0)

    @property
    def expected_events(self):
        return self.lam * (self.a + self.duration.mean)

    def telecom_params(self):
        """``(Q, gamma)`` of the limit: ``Q = L c_U gamma``."""
        return TelecomParams.from_service(self.L, self.duration.c_U, self.gamma)

    def mean_workload(self, t):
        """``E W*(a t) = E R E U lam a t``."""
        return self.reward.mean() * self.duration.mean * self.lam * self.a * np.asarray(t, dtype=float)


def _replicate_indices(replicates):
    if np.ndim(replicates) == 0:
        return np.arange(int(replicates), dtype=np.int64)
    return np.asarray(replicates, dtype=np.int64)


def simulate_workload(p: ServiceSystemParams, t_grid, seed, replicates=1, backend=None):
    """Integral workload ``W*(a t)`` on ``t_grid``, one row per replicate.

    Sessions starting in ``[0, a]`` form a Poisson process of rate ``lam``;
    sessions already running at time 0 are a Poisson(``lam E U``) number with
    elapsed time drawn from ``P(U > x) / E U`` and length from ``U | U > x``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) < 0) or np.any((t_grid < 0) | (t_grid > 1)):
        raise DomainError("t_grid must be sorted inside [0, 1]")
    if p.expected_events > p.max_events:
        raise ResourceError(f"expected {p.expected_events:.3g} sessions per replicate exceeds cap {p.max_events:.3g}")
    reps = _replicate_indices(replicates)
    d = p.duration
    n_sess = kernels.poisson_counts(stream_keys(seed, reps, Purpose.ARRIVALS), p.lam * p.a)
    n_past = kernels.poisson_counts(stream_keys(seed, reps, Purpose.PAST), p.lam * d.mean)
    kind, params = p.reward.kernel_params()
    return kernels.workload(
        n_sess, n_past,
        stream_keys(seed, reps, Purpose.SESSIONS), stream_keys(seed, reps, Purpose.PAST_SESSIONS),
        p.a, d.gamma, d.u_min, d.mean, kind, params, p.a * t_grid, backend=backend,
    )


def simulate_Z_a(p: ServiceSystemParams, t_grid, seed, replicates=1, backend=None):
    """Normalized workload ``(W*(a t) - E R E U lam a t) / a``."""
    w = simulate_workload(p, t_grid, seed, replicates, backend=backend)
    return (w - p.mean_workload(t_grid)) / p.a


# ----------------------------------------------------------------------------
# sampling jumps of mu_lr on a band
# ----------------------------------------------------------------------------


class TabulatedPPF:
    """Inverse of a monotone CDF from a log-spaced table, refined by bisection.

    Parameters
    ----------
    cdf : callable
        Vectorized nondecreasing function on ``[lo, hi]`` with ``cdf(lo) = 0``.
    lo, hi : float
        Positive, finite table range.
    n : int
        Number of table nodes.
    tol : float
        Target accuracy of ``cdf(x) - u`` (relative to the total mass).
    """

    def __init__(self, cdf, lo, hi, n=2048, tol=1e-8):
        if not (0 < lo < hi < math.inf):
            raise DomainError("table range must satisfy 0 < lo < hi < inf")
        self.cdf, self.tol = cdf, tol
        x = np.geomspace(lo, hi, n)
        c = np.asarray(cdf(x), dtype=float)
        self.total = float(c[-1])
        if not self.total > 0:
            raise InversionError("tabulated distribution has no mass")
        self.x = x
        self.c = np.maximum.accumulate(c / self.total)
        keep = np.concatenate(([True], np.diff(self.c) > 0))
        self._guess = interpolate.PchipInterpolator(self.c[keep], np.log(x[keep]), extrapolate=True)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        k = np.clip(np.searchsorted(self.c, u, side="left"), 1, self.x.size - 1)
        a, b = self.x[k - 1].copy(), self.x[k].copy()
        x = np.clip(np.exp(self._guess(u)), a, b)
        for _ in range(200):
            err = self.cdf(x) / self.total - u
            done = (np.abs(err) <= self.tol) | (b - a <= 1e-14 * b)
            if np.all(done):
                break
            hi_side = err > 0
            b = np.where(~done & hi_side, x, b)
            a = np.where(~done & ~hi_side, x, a)
            x = np.where(done, x, 0.5 * (a + b))
        else:
            raise InversionError("tabulated inverse did not reach its tolerance")
        return x


@dataclass
class BandSampler:
    """Normalized ``mu_lr`` restricted to ``[lo, hi)``.

    The reward marginal ``mu_ell[lo / r, hi / r) F_R(dr)`` is an exact mixture
    of the power-tilted laws ``r^gamma F_R(dr)`` and ``r^(gamma-1) F_R(dr)`` on
    ``[lo/t, hi/t)`` and ``[hi/t, inf)``; each is inverted in closed form
    (``tilted_ppf``).  Given ``r`` the overlap length comes from
    ``kernels.ell_inverse``.  ``method="tabulated"`` inverts the reward
    marginal numerically instead.
    """

    m: TailMeasure
    lo: float
    hi: float = math.inf
    method: str = "exact"
    comps: list = field(init=False)
    mass: float = field(init=False)

    def __post_init__(self):
        m, lo, hi = self.m, self.lo, self.hi
        if not (0 < lo < hi):
            raise DomainError("band needs 0 < lo < hi")
        g, t, R = m.gamma, m.t, m.reward
        c2 = (2.0 - g) / ((g - 1.0) * g)
        ra, rb = lo / t, hi / t
        comps = []
        if rb > ra:
            comps.append((t * lo**-g / g, g, ra, rb))
            comps.append((c2 * lo ** (1 - g), g - 1.0, ra, rb))
        if math.isfinite(hi):
            comps.append((t * (lo**-g - hi**-g) / g, g, rb, math.inf))
            comps.append((c2 * (lo ** (1 - g) - hi ** (1 - g)), g - 1.0, rb, math.inf))
        masses = np.array([c * float(R.partial_moment(p, a, b)) for c, p, a, b in comps])
        self.comps = [c for c, w in zip(comps, masses) if w > 0]
        masses = masses[masses > 0]
        self.mass = float(masses.sum())
        self._cum = np.cumsum(masses) / self.mass if self.mass > 0 else np.ones(1)
        self._tables = None
        if self.method == "tabulated":
            self._tables = self._build_tables()
        elif self.method != "exact":
            raise ConfigurationError(f"unknown band sampling method {self.method!r}")

    def _build_tables(self):
        tables = []
        R = self.m.reward
        for c, p, a, b in self.comps:
            s_lo, s_hi = R.support()
            x0 = max(a, s_lo, 1e-300)
            x1 = min(b, s_hi)
            if not math.isfinite(x1):
                # range holding all but 1e-12 of the tilted mass
                tot = float(R.partial_moment(p, a, math.inf))
                x1 = max(2 * x0, 1.0)
                while float(R.partial_moment(p, x1, math.inf)) > 1e-12 * tot:
                    x1 *= 2.0
            lo_edge = x0
            f = lambda x, p=p, lo_edge=lo_edge: np.asarray(R.partial_moment(p, lo_edge, np.nextafter(x, np.inf)), dtype=float)
            tables.append(TabulatedPPF(f, x0 * (1 - 1e-12), x1))
        return tables

    def sample(self, u_comp, u_r, u_ell):
        """Jumps ``v = r * ell`` from three arrays of uniforms."""
        u_comp = np.asarray(u_comp, dtype=float)
        k = np.minimum(np.searchsorted(self._cum, u_comp, side="right"), len(self.comps) - 1)
        r = np.empty(u_comp.shape)
        for j, (c, p, a, b) in enumerate(self.comps):
            sel = k == j
            if not np.any(sel):
                continue
            if self._tables is not None:
                r[sel] = self._tables[j](u_r[sel])
            else:
                r[sel] = self.m.reward.tilted_ppf(p, a, b, u_r[sel])
        ell = kernels.ell_inverse(self.m.t, self.m.gamma, self.lo / r, self.hi / r, u_ell)
        return r * ell


def _band_draws(sampler, seed, owners, counters, purposes):
    keys = [stream_keys(seed, owners, pu) for pu in purposes]
    return sampler.sample(*(uniforms_at(k, counters) for k in keys))


def sample_big_jumps(m: TailMeasure, Q, v0, seed, replicate=0):
    """Jumps ``>= v0`` of the Poisson measure with intensity ``Q mu_lr`` for one replicate."""
    if not v0 > 0:
        raise DomainError("v0 must be positive")
    if v0 > m.v_max:
        return np.empty(0)
    samp = BandSampler(m, v0)
    n = int(kernels.poisson_counts(stream_keys(seed, [replicate], Purpose.BIG_COUNT), Q * samp.mass)[0])
    own = np.full(n, replicate, dtype=np.int64)
    return _band_draws(samp, seed, own, np.arange(n, dtype=np.uint64), (Purpose.BIG_COMPONENT, Purpose.BIG_R, Purpose.BIG_ELL))


# ----------------------------------------------------------------------------
# split configuration
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitConfig:
    """Big/small threshold ``v0`` and the inner truncation ``epsilon``.

    Parameters
    ----------
    v0 : float
        Jumps ``>= v0`` are "big".
    epsilon : float, optional
        Jumps below ``epsilon`` are not simulated individually.  When omitted
        it is chosen by ``residual``: for ``"gaussian"`` the largest value
        whose sub-``epsilon`` part has skewness at most ``skew_tol``; for
        ``"drop"`` the value whose neglected-variance bound is ``1e-6`` of the
        small-part bound.
    residual : {"gaussian", "drop"}
        Treatment of the sub-``epsilon`` jumps.
    max_small_jumps : float
        Cap on the expected number of exact small jumps per replicate.
    """

    v0: float
    epsilon: float | None = None
    residual: str = "gaussian"
    skew_tol: float = 0.01
    max_small_jumps: float = 2e5

    def __post_init__(self):
        if not self.v0 > 0:
            raise DomainError("v0 must be positive")
        if self.epsilon is not None and not 0 < self.epsilon < self.v0:
            raise DomainError("need 0 < epsilon < v0")
        if self.residual not in ("gaussian", "drop"):
            raise ConfigurationError("residual must be 'gaussian' or 'drop'")

    @classmethod
    def from_h(cls, h, scale, **kw):
        """``v0 = h * scale`` (``scale`` is ``t`` or ``rho``)."""
        return cls(v0=h * scale, **kw)

    def resolve(self, m: TailMeasure, Q):
        return ResolvedSplit.build(self, m, Q)


@dataclass(frozen=True)
class ResolvedSplit:
    """A split with ``epsilon`` fixed and all deterministic pieces precomputed."""

    v0: float
    epsilon: float
    residual: str
    small_rate: float
    small_compensator: float
    centering: float
    big_rate: float
    residual_variance: float
    residual_skewness: float
    residual_variance_bound: float
    small_variance: float

    @classmethod
    def build(cls, cfg: SplitConfig, m: TailMeasure, Q):
        v0 = cfg.v0
        g, t = m.gamma, m.t
        d2 = 2.0 * Q * m.reward_moment / (g * (g - 1.0) * (2.0 - g))
        eps = cfg.epsilon
        if eps is None:
            if cfg.residual == "drop":
                eps = v0 * 1e-6 ** (1.0 / (2.0 - g))
            else:
                eps = _auto_epsilon(m, Q, v0, cfg.skew_tol, cfg.max_small_jumps)
        rate = Q * m.band_mass(eps, v0)
        if rate > cfg.max_small_jumps:
            raise ResourceError(f"{rate:.3g} expected small jumps per replicate exceeds cap {cfg.max_small_jumps:.3g}")
        k2 = Q * m.lower_moment(2, eps)
        k3 = Q * m.lower_moment(3, eps)
        return cls(
            v0=v0,
            epsilon=eps,
            residual=cfg.residual,
            small_rate=rate,
            small_compensator=Q * m.band_moment(1, eps, v0),
            centering=centering_Et(m, Q, v0),
            big_rate=Q * m.tail(v0),
            residual_variance=k2,
            residual_skewness=k3 / k2**1.5 if k2 > 0 else 0.0,
            residual_variance_bound=d2 * t * eps ** (2.0 - g),
            small_variance=Q * m.lower_moment(2, v0),
        )

    def diagnostics(self):
        return {k: float(v) if not isinstance(v, str) else v for k, v in self.__dict__.items()}


def _auto_epsilon(m, Q, v0, skew_tol, max_jumps):
    """Largest ``eps <= v0`` whose sub-``eps`` part has skewness ``<= skew_tol``.

    Skewness of the sub-``eps`` part grows like ``eps^(gamma/2)``, so a
    bisection in ``log eps`` finds it; the jump-count cap can force a larger
    ``eps`` (the achieved skewness is reported by the resolved split).
    """

    def skew(e):
        k2 = Q * m.lower_moment(2, e)
        return Q * m.lower_moment(3, e) / k2**1.5

    if skew(v0) <= skew_tol:
        return v0 * (1 - 1e-12)
    lo, hi = math.log(v0) - 60.0, math.log(v0)
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if skew(math.exp(mid)) <= skew_tol:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-6:
            break
    eps = math.exp(lo)
    if Q * m.band_mass(eps, v0) > max_jumps:
        lo, hi = math.log(eps), math.log(v0)
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if Q * m.band_mass(math.exp(mid), v0) > max_jumps:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-9:
                break
        eps = math.exp(hi)
    return eps


# ----------------------------------------------------------------------------
# Telecom marginal
# ----------------------------------------------------------------------------


def centering_Et(m: TailMeasure, Q, v0):
    """``Q * integral_{[v0, inf)} v mu_lr(dv)``."""
    return Q * m.mean_above(v0)


@dataclass(frozen=True)
class TelecomSample:
    value: float
    big_jump_count: int
    big_sum: float
    small_sum: float
    centering: float
    residual_variance: float


@dataclass
class TelecomBatch:
    """Columns of ``TelecomSample`` for many replicates."""

    value: np.ndarray
    big_jump_count: np.ndarray
    big_sum: np.ndarray
    small_sum: np.ndarray
    centering: float
    split: ResolvedSplit
    replicates: np.ndarray

    def __len__(self):
        return self.value.size

    def __getitem__(self, i):
        return TelecomSample(
            float(self.value[i]), int(self.big_jump_count[i]), float(self.big_sum[i]),
            float(self.small_sum[i]), self.centering, self.split.residual_variance,
        )


def _small_part(m, split: ResolvedSplit, seed, reps, chunk_jumps=1 << 21):
    """Compensated exact jumps in ``[eps, v0)`` plus the sub-``eps`` residual."""
    out = np.zeros(reps.size)
    if split.small_rate > 0:
        samp = BandSampler(m, split.epsilon, split.v0)
        counts = kernels.poisson_counts(stream_keys(seed, reps, Purpose.SMALL_COUNT), split.small_rate)
        ends = np.cumsum(counts)
        start = 0
        while start < reps.size:
            # replicates [start, stop) hold at most chunk_jumps jumps (at least one replicate)
            base = ends[start - 1] if start else 0
            stop = max(start + 1, int(np.searchsorted(ends, base + chunk_jumps, side="right")))
            owner, pos = segment_counters(counts[start:stop])
            v = _band_draws(samp, seed, reps[start:stop][owner], pos, (Purpose.SMALL_COMPONENT, Purpose.SMALL_R, Purpose.SMALL_ELL))
            out[start:stop] = kernels.segment_sum(owner, v, stop - start)
            start = stop
    out = out - split.small_compensator
    if split.residual == "gaussian" and split.residual_variance > 0:
        z = special.ndtri(uniforms_at(stream_keys(seed, reps, Purpose.RESIDUAL), np.zeros(reps.size, dtype=np.uint64)))
        out = out + math.sqrt(split.residual_variance) * z
    return out


def _big_part(m, split: ResolvedSplit, seed, reps):
    counts = kernels.poisson_counts(stream_keys(seed, reps, Purpose.BIG_COUNT), split.big_rate)
    sums = np.zeros(reps.size)
    if counts.sum():
        samp = BandSampler(m, split.v0)
        owner, pos = segment_counters(counts)
        v = _band_draws(samp, seed, reps[owner], pos, (Purpose.BIG_COMPONENT, Purpose.BIG_R, Purpose.BIG_ELL))
        sums = kernels.segment_sum(owner, v, reps.size)
    return counts, sums


def simulate_small_part(m: TailMeasure, Q, split, seed, replicates=1):
    """``Y°(t)``: the compensated integral over ``[0, v0)``."""
    rs = split if isinstance(split, ResolvedSplit) else split.resolve(m, Q)
    return _small_part(m, rs, seed, _replicate_indices(replicates))


def simulate_telecom_batch(m: TailMeasure, split, seed, replicates, Q=None):
    """``Y(t)`` for a batch of replicates; replicate ``i`` only reads its own streams."""
    Q = m.Q if Q is None else Q
    rs = split if isinstance(split, ResolvedSplit) else split.resolve(m, Q)
    reps = _replicate_indices(replicates)
    small = _small_part(m, rs, seed, reps)
    counts, big = _big_part(m, rs, seed, reps)
    value = small + big - rs.centering
    return TelecomBatch(value, counts, big, small, rs.centering, rs, reps)


def simulate_telecom(m: TailMeasure, Q, split, seed, replicate=0):
    return simulate_telecom_batch(m, split, seed, [replicate], Q=Q)[0]


# ----------------------------------------------------------------------------
# exponential moments and the Chernoff bound of the small part
# ----------------------------------------------------------------------------


def exp_moment_exponent(m: TailMeasure, Q, v0, lam):
    """``Q integral_{[0, v0)} (e^(lam v) - 1 - lam v) mu_lr(dv)`` by parts against the tail."""
    if lam < 0:
        raise DomainError("lam must be nonnegative")
    if lam == 0:
        return 0.0
    mv0 = m.tail(v0)
    f = lambda v: lam * math.expm1(lam * v) * (m.band_moment(0, v) - mv0)
    pts = m._breakpoints(0.0, v0)
    return Q * quad(f, 0.0, v0, points=pts, what="exponential moment")


def exp_moment_small(m: TailMeasure, Q, v0, lambda_exp, cap=700.0):
    """``E exp(lambda Y°(t))``; raises ``ExponentCapError`` when the exponent exceeds ``cap``."""
    try:
        k = exp_moment_exponent(m, Q, v0, lambda_exp)
    except OverflowError:
        k = math.inf
    if k > cap:
        raise ExponentCapError(f"exponent {k:.4g} exceeds cap {cap}")
    return math.exp(k)


def bound_constants(m: TailMeasure, Q):
    """``D1``, ``D2``, ``D3``, ``D4`` of the centering, variance and exponential-moment bounds."""
    g, er = m.gamma, m.reward_moment
    return {
        "D1": Q * er / (g - 1.0) ** 2,
        "D2": 2.0 * Q * er / (g * (g - 1.0) * (2.0 - g)),
        "D3": 2.0**g * er / (g * (g - 1.0)),
        "D4": 2.0 ** (g - 1.0) * er / (g * (g - 1.0) * (2.0 - g)),
    }


def chernoff_bound(m: TailMeasure, Q, v0, y):
    """Bound on ``P(Y°(t) >= y)`` from ``E exp(lam Y°) <= exp(A e^(lam v0))``.

    ``A = Q (D3 + 3 D4) t v0^(-gamma)``; the optimized bound is
    ``exp(y / v0) (A v0 / y)^(y / v0)`` when ``y > A v0`` and 1 otherwise.
    """
    c = bound_constants(m, Q)
    A = Q * (c["D3"] + 3.0 * c["D4"]) * m.t * v0 ** (-m.gamma)
    if y <= A * v0:
        return 1.0
    z = y / v0
    return math.exp(z + z * math.log(A * v0 / y))


def chernoff_bound_exact(m: TailMeasure, Q, v0, y, cap=700.0):
    """``inf_lam exp(K(lam) - lam y)`` with the exact cumulant ``K`` of ``Y°``."""
    def obj(log_lam):
        lam = math.exp(log_lam)
        k = exp_moment_exponent(m, Q, v0, lam)
        return min(k, cap) - lam * y

    res = optimize.minimize_scalar(obj, bounds=(math.log(1e-6 / v0), math.log(50.0 / v0)), method="bounded")
    return min(1.0, math.exp(res.fun))
