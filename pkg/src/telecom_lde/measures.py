"""Kernel, overlap-length measure, workload-jump measure and the scale-free measure on [0, 1].

Notation used in the code:

* ``mu_ell`` is the image of ``ds du / u^(gamma+1)`` under the overlap length
  ``ell_t(s, u)``; it lives on ``(0, t]`` with a density on ``(0, t)`` and an
  atom at ``t``.
* ``TailMeasure`` is the image of ``mu_ell x F_R`` under ``(ell, r) -> r ell``,
  i.e. the Levy measure (per unit ``Q``) of the Telecom marginal ``Y(t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .distributions import RewardLaw
from .errors import DomainError, IntegrationError


def check_gamma(gamma):
    if not 1.0 < gamma < 2.0:
        raise DomainError(f"gamma must lie in (1, 2), got {gamma}")


@dataclass(frozen=True)
class TelecomParams:
    """Intensity multiplier ``Q`` and tail index ``gamma`` of the Telecom process."""

    Q: float
    gamma: float
    L: float | None = None
    c_U: float | None = None

    def __post_init__(self):
        check_gamma(self.gamma)
        if not self.Q > 0:
            raise DomainError("Q must be positive")

    @classmethod
    def from_service(cls, L, c_U, gamma):
        """Parameters of the limit reached under critical intensity ``lambda / a^(gamma-1) -> L``."""
        if not (L > 0 and c_U > 0):
            raise DomainError("L and c_U must be positive")
        return cls(Q=L * c_U * gamma, gamma=gamma, L=L, c_U=c_U)


def kernel_ell(s, u, t):
    """Length of ``[s, s + u] & [0, t]``."""
    s, u, t = (np.asarray(x, dtype=float) for x in (s, u, t))
    out = np.clip(np.minimum(s + u, t) - np.maximum(s, 0.0), 0.0, None)
    return out.item() if out.ndim == 0 else out


def _c2(gamma):
    return (2.0 - gamma) / ((gamma - 1.0) * gamma)


def _ell_tail_raw(t, gamma, x):
    # closed form valid for 0 < x <= t
    return t * x ** (-gamma) / gamma + _c2(gamma) * x ** (1.0 - gamma)


def mu_ell_tail(t, gamma, ell0):
    """``mu_ell[ell0, t]``, zero for ``ell0 > t``."""
    check_gamma(gamma)
    x = np.asarray(ell0, dtype=float)
    if np.any(x <= 0):
        raise DomainError("ell0 must be positive")
    with np.errstate(over="ignore"):
        out = np.where(x <= t, _ell_tail_raw(t, gamma, np.minimum(x, t)), 0.0)
    return out.item() if out.ndim == 0 else out


def mu_ell_atom(t, gamma):
    """Weight of ``mu_ell`` at the right end point ``t``."""
    check_gamma(gamma)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("t must be positive")
    out = t ** (1.0 - gamma) / ((gamma - 1.0) * gamma)
    return out.item() if out.ndim == 0 else out


def mu_ell_density(t, gamma, ell):
    """Density of ``mu_ell`` on ``(0, t)``."""
    check_gamma(gamma)
    x = np.asarray(ell, dtype=float)
    if np.any((x <= 0) | (x >= t)):
        raise DomainError("ell must lie in (0, t)")
    out = t * x ** (-1.0 - gamma) + (2.0 - gamma) / gamma * x ** (-gamma)
    return out.item() if out.ndim == 0 else out


def quad(f, a, b, epsrel=1e-9, epsabs=0.0, limit=1000, points=None, what="integral"):
    """``scipy.integrate.quad`` that raises instead of warning."""
    kw = dict(epsrel=epsrel, epsabs=epsabs, limit=limit, full_output=1)
    if points is not None and np.isfinite(a) and np.isfinite(b):
        kw["points"] = points
    res = integrate.quad(f, a, b, **kw)
    val, err = res[0], res[1]
    # QUADPACK flags (roundoff, subdivision limit) are fatal only if the error
    # estimate is also far off the target
    target = max(epsrel * abs(val), epsabs, 1e-300)
    if err > 1e3 * target or (len(res) > 3 and err > 10 * target):
        raise IntegrationError(f"{what}: quadrature did not converge (value {val:.6e}, error {err:.2e})")
    return val


def _ppow(x, q):
    """``x**q`` for x >= 0 with ``0**q = inf`` when q < 0 (and 0 for q > 0)."""
    with np.errstate(divide="ignore", over="ignore"):
        return np.power(x, q)


@dataclass(frozen=True)
class TailMeasure:
    """Jump measure of ``Y(t)`` per unit ``Q``: ``mu_lr[v, inf) = E mu_ell[v / R, t]``."""

    t: float
    params: TelecomParams
    reward: RewardLaw
    _er_gamma: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.t > 0:
            raise DomainError("t must be positive")
        try:
            er = float(self.reward.moment(self.params.gamma))
        except DomainError:
            er = math.inf
        object.__setattr__(self, "_er_gamma", er)

    @property
    def gamma(self):
        return self.params.gamma

    @property
    def Q(self):
        return self.params.Q

    @property
    def reward_moment(self):
        """``E R^gamma`` (``inf`` when the reward law has no such moment)."""
        return self._er_gamma

    @property
    def v_max(self):
        """Largest possible jump ``t * ess_sup(R)``."""
        return self.t * self.reward.ess_sup

    # ------------------------------------------------------------------
    def band_moment(self, k, lo, hi=math.inf):
        """``integral_{[lo, hi)} v^k mu_lr(dv)`` in closed form, ``k in {0, 1, 2, 3}``."""
        g, t, R = self.gamma, self.t, self.reward
        kk = (2.0 - g) / g
        w = mu_ell_atom(t, g)
        if k == 0 or k == 1:
            if lo <= 0:
                return math.inf
        if not hi > lo:
            return 0.0
        q1, q2 = k - g, k + 1.0 - g
        rA, rB = lo / t, hi / t
        total = 0.0
        # region A: lo / t <= r < hi / t, the whole overlap range [lo / r, t] contributes
        if rB > rA:
            c_a = t * t**q1 / q1 + kk * t**q2 / q2 + w * t**k
            if k in (0, 1):
                c_a = 0.0  # identically zero; avoids cancellation
            if c_a != 0.0:
                total += c_a * R.partial_moment(float(k), rA, rB)
            if lo > 0:
                total -= t * lo**q1 / q1 * R.partial_moment(g, rA, rB)
                total -= kk * lo**q2 / q2 * R.partial_moment(g - 1.0, rA, rB)
        # region B: r >= hi / t, only [lo / r, hi / r) contributes
        if math.isfinite(hi):
            lo_q1 = float(_ppow(lo, q1)) if lo > 0 or q1 > 0 else math.inf
            lo_q2 = float(_ppow(lo, q2)) if lo > 0 or q2 > 0 else math.inf
            total += t * (hi**q1 - lo_q1) / q1 * R.partial_moment(g, rB, math.inf)
            total += kk * (hi**q2 - lo_q2) / q2 * R.partial_moment(g - 1.0, rB, math.inf)
        return max(float(total), 0.0)

    def tail(self, v, method="auto"):
        """``mu_lr[v, inf)``: closed form, or quadrature over the reward law."""
        if method == "quad":
            return self.tail_quad(v)
        self._check_positive(v)
        try:
            out = self._tail_closed(np.asarray(v, dtype=float))
        except NotImplementedError:
            if method == "closed":
                raise
            return self.tail_quad(v)
        return out.item() if out.ndim == 0 else out

    def _tail_closed(self, v):
        # band_moment(0, v, inf), vectorized: only the r >= v / t region contributes
        g, t, R = self.gamma, self.t, self.reward
        kap = v / t
        a = t * v ** (-g) / g * np.asarray(R.partial_moment(g, kap, np.inf), dtype=float)
        b = _c2(g) * v ** (1.0 - g) * np.asarray(R.partial_moment(g - 1.0, kap, np.inf), dtype=float)
        return np.maximum(a + b, 0.0)

    def _check_positive(self, v):
        if np.any(np.asarray(v) <= 0):
            raise DomainError("v must be positive")

    def tail_quad(self, v):
        """Quadrature oracle for ``tail``: integrate ``mu_ell[v / r, t]`` against ``F_R``."""
        self._check_positive(v)
        g, t = self.gamma, self.t

        def one(x):
            return self.reward.expect(lambda r: float(mu_ell_tail(t, g, x / r)), lo=x / t)

        out = np.asarray([one(float(x)) for x in np.atleast_1d(v).ravel()]).reshape(np.shape(v))
        return out.item() if out.ndim == 0 else out

    def tail_bound(self, v):
        """Upper bound ``E R^gamma t v^(-gamma) / (gamma (gamma - 1))``."""
        if not math.isfinite(self._er_gamma):
            raise DomainError("E R^gamma is infinite; the tail bound does not exist")
        self._check_positive(v)
        g = self.gamma
        out = self._er_gamma / (g * (g - 1.0)) * self.t * np.asarray(v, dtype=float) ** (-g)
        return out.item() if out.ndim == 0 else out

    def tail_asymptotic(self, v):
        """Leading term ``E R^gamma t v^(-gamma) / gamma`` for ``1 << v << t``."""
        g = self.gamma
        out = self._er_gamma / g * self.t * np.asarray(v, dtype=float) ** (-g)
        return out.item() if out.ndim == 0 else out

    def mean_above(self, v0, method="auto"):
        """``integral_{[v0, inf)} v mu_lr(dv)``."""
        if not v0 > 0:
            raise DomainError("v0 must be positive")
        if method == "quad":
            return self.mean_above_quad(v0)
        return self.band_moment(1, v0)

    def mean_above_quad(self, v0):
        """Tail-integration oracle ``v0 tail(v0) + integral_{v0}^inf tail(v) dv``."""
        upper = self.v_max
        f = lambda v: self.band_moment(0, v)
        if upper <= v0:
            return 0.0
        pts = self._breakpoints(v0, upper)
        if math.isfinite(upper):
            body = quad(f, v0, upper, points=pts, what="mean above")
        else:
            split = max(2.0 * v0, 2.0 * self.t)
            body = quad(f, v0, split, points=pts, what="mean above") + quad(f, split, math.inf, what="mean above")
        return v0 * f(v0) + body

    def _breakpoints(self, a, b):
        pts, _ = self.reward.atoms
        pts = self.t * pts
        pts = pts[(pts > a) & (pts < b)]
        return list(pts) if pts.size else None

    def band_mass(self, lo, hi=math.inf):
        return self.band_moment(0, lo, hi)

    def lower_moment(self, k, eps):
        """``integral_{[0, eps)} v^k mu_lr(dv)`` for ``k in {2, 3}``."""
        if k not in (2, 3):
            raise DomainError("lower moments exist for k = 2, 3")
        return self.band_moment(k, 0.0, eps)

    # ------------------------------------------------------------------
    def log_cf(self, theta, Q=None):
        """Log characteristic function of ``Y(t)`` with intensity ``Q mu_lr``.

        ``psi(theta) = i theta Q integral_0^inf (e^(i theta v) - 1) tail(v) dv``
        (integration by parts of the Levy-Khintchine exponent), evaluated by
        adaptive quadrature.  Used as an exact reference for the simulator.
        """
        Q = self.Q if Q is None else Q
        th = float(theta)
        if th == 0.0:
            return 0j
        f = lambda v: self.band_moment(0, v)
        upper = self.v_max
        cut = upper if math.isfinite(upper) else 4.0 * self.t * max(1.0, self.reward.support()[0])
        pts = self._breakpoints(0.0, cut)
        # oscillation-aware subdivision
        n_osc = abs(th) * cut / (2 * math.pi)
        lim = int(min(20000, 200 + 50 * n_osc))
        # absolute accuracy 1e-12 on psi itself
        kw = dict(limit=lim, epsabs=1e-12 / (abs(th) * Q), epsrel=1e-10, points=pts)
        re = quad(lambda v: -2.0 * math.sin(0.5 * th * v) ** 2 * f(v), 0.0, cut, what="log cf", **kw)
        im = quad(lambda v: math.sin(th * v) * f(v), 0.0, cut, what="log cf", **kw)
        if not math.isfinite(upper):
            # tail beyond the cut: Fourier integrals plus the exact -integral of tail(v)
            cos_t = integrate.quad(f, cut, math.inf, weight="cos", wvar=abs(th), limlst=200)[0]
            sin_t = integrate.quad(f, cut, math.inf, weight="sin", wvar=abs(th), limlst=200)[0]
            sin_t = math.copysign(1.0, th) * sin_t
            rest = self.mean_above(cut) - cut * f(cut)
            re += cos_t - rest
            im += sin_t
        return 1j * th * Q * (re + 1j * im)


@dataclass(frozen=True)
class NuMeasure:
    """Scale-free overlap measure on [0, 1]: density plus an atom at 1."""

    gamma: float

    def __post_init__(self):
        check_gamma(self.gamma)

    @property
    def atom(self):
        return 1.0 / (self.gamma * (self.gamma - 1.0))

    def density(self, s):
        s = np.asarray(s, dtype=float)
        g = self.gamma
        out = s ** (-g - 1.0) + (2.0 - g) / g * s ** (-g)
        return out.item() if out.ndim == 0 else out

    def tail(self, s0):
        """``nu[s0, 1]`` with the atom included."""
        s0 = np.asarray(s0, dtype=float)
        if np.any((s0 <= 0) | (s0 > 1)):
            raise DomainError("s0 must lie in (0, 1]")
        return mu_ell_tail(1.0, self.gamma, s0)


def nu_tail(n: NuMeasure, s0):
    return n.tail(s0)


def mu_lr_tail(m: TailMeasure, v, method="auto"):
    return m.tail(v, method=method)


def mu_lr_tail_bound(m: TailMeasure, v):
    return m.tail_bound(v)


def mu_lr_mean_above(m: TailMeasure, v0, method="auto"):
    return m.mean_above(v0, method=method)
