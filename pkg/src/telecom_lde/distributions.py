"""Reward and duration laws.

Reward laws expose tails ``P(R >= x)``, closed-form partial moments
``E(R^p 1{lo <= R < hi})``, inverse-CDF sampling and inverse-CDF sampling of
the power-tilted law ``r^p F_R(dr)`` restricted to an interval.  The last one
is what lets the jump samplers draw rewards exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DomainError, IntegrationError

# kind codes shared with the numba kernels
KIND_DEGENERATE = 0
KIND_UNIFORM = 1
KIND_PARETO = 2
KIND_TRUNCATED_PARETO = 3
KIND_DISCRETE = 4


def _as_float(x):
    a = np.asarray(x, dtype=float)
    return a


def _ret(a):
    return a.item() if np.ndim(a) == 0 else a


def _pow_segment(lo, hi, q):
    """``integral_lo^hi r^(q-1) dr`` for 0 <= lo <= hi, vectorized; q may be <= 0."""
    lo, hi = np.broadcast_arrays(_as_float(lo), _as_float(hi))
    out = np.zeros(lo.shape)
    live = hi > lo
    if not np.any(live):
        return out
    l, h = lo[live], hi[live]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if q == 0.0:
            val = np.log(h) - np.log(l)
        else:
            val = (h**q - l**q) / q
    out[live] = val
    return out


class RewardLaw:
    """Law of the per-session resource demand ``R`` (``P(R > 0) = 1``)."""

    kind: str = ""
    kind_code: int = -1

    # --- interface -------------------------------------------------------
    def tail(self, x):
        """``P(R >= x)``."""
        raise NotImplementedError

    def ppf(self, u):
        """Generalized inverse CDF on (0, 1)."""
        raise NotImplementedError

    def partial_moment(self, p, lo, hi=np.inf):
        """``E(R^p 1{lo <= R < hi})``; may be ``inf``."""
        raise NotImplementedError

    def tilted_ppf(self, p, lo, hi, u):
        """Inverse CDF of ``r^p F_R(dr)`` restricted to ``[lo, hi)``."""
        raise NotImplementedError

    @property
    def ess_sup(self) -> float:
        raise NotImplementedError

    @property
    def tail_index(self):
        """Regular-variation order ``m`` of the tail, ``None`` if not regularly varying."""
        return None

    @property
    def delta(self) -> float:
        """Tail index capped at 2 (finite-variance laws count as 2)."""
        m = self.tail_index
        return 2.0 if m is None else min(m, 2.0)

    @property
    def atoms(self):
        """``(points, weights)`` of the atomic part, empty for continuous laws."""
        return np.empty(0), np.empty(0)

    def pdf(self, x):
        raise NotImplementedError(f"{self.kind} has no density")

    def support(self):
        """Interval ``(lo, hi)`` containing the support."""
        raise NotImplementedError

    def kernel_params(self):
        """``(kind_code, params)`` consumed by the compiled workload kernel."""
        raise NotImplementedError

    # --- shared ----------------------------------------------------------
    def cdf(self, x):
        return _ret(1.0 - _as_float(self.tail(np.nextafter(_as_float(x), np.inf))))

    def truncated_moment(self, p, kappa=0.0):
        """``E(R^p 1{R >= kappa})``; ``kappa = 0`` gives the full moment."""
        if p <= 0:
            raise DomainError("moment order must be positive")
        val = self.partial_moment(p, kappa, np.inf)
        if not np.all(np.isfinite(val)):
            raise DomainError(f"E R^{p} is infinite for {self!r}")
        return val

    def moment(self, p):
        return self.truncated_moment(p, 0.0)

    def mean(self):
        return self.moment(1.0)

    def sample(self, rng, size=None):
        """Inverse-CDF draws from a ``numpy.random.Generator``."""
        return self.ppf(rng.random(size))

    def has_atom_at(self, x) -> bool:
        pts, _ = self.atoms
        return bool(np.any(pts == x))

    def expect(self, func, lo=0.0, hi=np.inf, epsrel=1e-9, points=None):
        """Quadrature of ``E(func(R) 1{lo <= R < hi})``; independent of closed forms."""
        pts, wts = self.atoms
        if pts.size:
            sel = (pts >= lo) & (pts < hi)
            return float(np.sum(wts[sel] * np.asarray([func(x) for x in pts[sel]])))
        s_lo, s_hi = self.support()
        a, b = max(lo, s_lo), min(hi, s_hi)
        if not b > a:
            return 0.0
        f = lambda r: func(r) * self.pdf(r)
        pieces = [a]
        if np.isfinite(b):
            pieces.append(b)
        else:
            pieces += [max(a * 2.0, a + 1.0), np.inf]
        total, err = 0.0, 0.0
        for x0, x1 in zip(pieces[:-1], pieces[1:]):
            val, e = integrate.quad(f, x0, x1, epsrel=epsrel, epsabs=0.0, limit=500, points=points if np.isfinite(x1) else None)
            total += val
            err += e
        if err > max(10 * epsrel * abs(total), 1e-300):
            raise IntegrationError(f"quadrature error {err:.3e} for expectation under {self!r}")
        return total


@dataclass(frozen=True)
class Degenerate(RewardLaw):
    c: float
    kind = "degenerate"
    kind_code = KIND_DEGENERATE

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError("degenerate reward must be positive")

    def tail(self, x):
        return _ret(np.where(_as_float(x) <= self.c, 1.0, 0.0))

    def ppf(self, u):
        return _ret(np.full(np.shape(u), self.c))

    def partial_moment(self, p, lo, hi=np.inf):
        lo, hi = np.broadcast_arrays(_as_float(lo), _as_float(hi))
        return _ret(np.where((lo <= self.c) & (self.c < hi), self.c**p, 0.0))

    def tilted_ppf(self, p, lo, hi, u):
        return _ret(np.full(np.shape(u), self.c))

    @property
    def ess_sup(self):
        return self.c

    @property
    def atoms(self):
        return np.array([self.c]), np.array([1.0])

    def support(self):
        return self.c, self.c

    def kernel_params(self):
        return self.kind_code, np.array([self.c])


@dataclass(frozen=True)
class Uniform(RewardLaw):
    """Uniform law on ``[0, b]``."""

    b: float = 1.0
    kind = "uniform"
    kind_code = KIND_UNIFORM

    def __post_init__(self):
        if not self.b > 0:
            raise DomainError("uniform upper end must be positive")

    def tail(self, x):
        x = _as_float(x)
        return _ret(np.clip(1.0 - x / self.b, 0.0, 1.0))

    def pdf(self, x):
        x = _as_float(x)
        return _ret(np.where((x >= 0) & (x <= self.b), 1.0 / self.b, 0.0))

    def ppf(self, u):
        return _ret(_as_float(u) * self.b)

    def partial_moment(self, p, lo, hi=np.inf):
        lo = np.clip(_as_float(lo), 0.0, self.b)
        hi = np.clip(_as_float(hi), 0.0, self.b)
        return _ret(_pow_segment(lo, hi, p + 1.0) / self.b)

    def tilted_ppf(self, p, lo, hi, u):
        q = p + 1.0
        lo = np.clip(_as_float(lo), 0.0, self.b)
        hi = np.clip(_as_float(hi), 0.0, self.b)
        u = _as_float(u)
        return _ret((lo**q + u * (hi**q - lo**q)) ** (1.0 / q))

    @property
    def ess_sup(self):
        return self.b

    def support(self):
        return 0.0, self.b

    def kernel_params(self):
        return self.kind_code, np.array([self.b])


@dataclass(frozen=True)
class Pareto(RewardLaw):
    """Pareto law, ``P(R >= x) = (x / x_min)^(-m)`` for ``x >= x_min``."""

    m: float
    x_min: float = 1.0
    kind = "pareto"
    kind_code = KIND_PARETO

    def __post_init__(self):
        if not (self.m > 0 and self.x_min > 0):
            raise DomainError("Pareto parameters must be positive")

    def tail(self, x):
        x = np.maximum(_as_float(x), self.x_min)
        return _ret((x / self.x_min) ** (-self.m))

    def pdf(self, x):
        x = _as_float(x)
        with np.errstate(divide="ignore"):
            return _ret(np.where(x >= self.x_min, self.m * self.x_min**self.m * x ** (-self.m - 1.0), 0.0))

    def ppf(self, u):
        return _ret(self.x_min * (1.0 - _as_float(u)) ** (-1.0 / self.m))

    def _norm(self):
        return self.m * self.x_min**self.m

    def partial_moment(self, p, lo, hi=np.inf):
        lo = np.maximum(_as_float(lo), self.x_min)
        hi = np.maximum(_as_float(hi), self.x_min)
        q = p - self.m
        with np.errstate(over="ignore"):
            val = self._norm() * _pow_segment(lo, hi, q)
        if q >= 0:
            val = np.where(np.isinf(hi) & (hi > lo), np.inf, val)
        return _ret(val)

    def tilted_ppf(self, p, lo, hi, u):
        q = p - self.m
        lo = np.maximum(_as_float(lo), self.x_min)
        hi = np.maximum(_as_float(hi), self.x_min)
        u = _as_float(u)
        if q == 0.0:
            return _ret(lo * (hi / lo) ** u)
        with np.errstate(divide="ignore"):
            return _ret((lo**q + u * (hi**q - lo**q)) ** (1.0 / q))

    @property
    def ess_sup(self):
        return math.inf

    @property
    def tail_index(self):
        return self.m

    def support(self):
        return self.x_min, math.inf

    def kernel_params(self):
        return self.kind_code, np.array([self.m, self.x_min])


@dataclass(frozen=True)
class TruncatedPareto(RewardLaw):
    """Pareto law conditioned on ``R < x_max``."""

    m: float
    x_min: float
    x_max: float
    kind = "truncated_pareto"
    kind_code = KIND_TRUNCATED_PARETO

    def __post_init__(self):
        if not (self.m > 0 and 0 < self.x_min < self.x_max < math.inf):
            raise DomainError("need m > 0 and 0 < x_min < x_max < inf")

    @property
    def _mass(self):
        return 1.0 - (self.x_min / self.x_max) ** self.m

    def tail(self, x):
        x = np.clip(_as_float(x), self.x_min, self.x_max)
        return _ret(((x / self.x_min) ** (-self.m) - (self.x_max / self.x_min) ** (-self.m)) / self._mass)

    def pdf(self, x):
        x = _as_float(x)
        inside = (x >= self.x_min) & (x <= self.x_max)
        with np.errstate(divide="ignore"):
            return _ret(np.where(inside, self.m * self.x_min**self.m * x ** (-self.m - 1.0) / self._mass, 0.0))

    def ppf(self, u):
        u = _as_float(u)
        return _ret(self.x_min * (1.0 - u * self._mass) ** (-1.0 / self.m))

    def partial_moment(self, p, lo, hi=np.inf):
        lo = np.clip(_as_float(lo), self.x_min, self.x_max)
        hi = np.clip(_as_float(hi), self.x_min, self.x_max)
        return _ret(self.m * self.x_min**self.m / self._mass * _pow_segment(lo, hi, p - self.m))

    def tilted_ppf(self, p, lo, hi, u):
        q = p - self.m
        lo = np.clip(_as_float(lo), self.x_min, self.x_max)
        hi = np.clip(_as_float(hi), self.x_min, self.x_max)
        u = _as_float(u)
        if q == 0.0:
            return _ret(lo * (hi / lo) ** u)
        return _ret((lo**q + u * (hi**q - lo**q)) ** (1.0 / q))

    @property
    def ess_sup(self):
        return self.x_max

    def support(self):
        return self.x_min, self.x_max

    def kernel_params(self):
        return self.kind_code, np.array([self.m, self.x_min, self.x_max])


@dataclass(frozen=True)
class DiscreteMixture(RewardLaw):
    """Finitely many positive atoms with weights summing to one."""

    points: tuple
    weights: tuple
    _pts: np.ndarray = field(init=False, repr=False, compare=False)
    _wts: np.ndarray = field(init=False, repr=False, compare=False)
    kind = "discrete"
    kind_code = KIND_DISCRETE

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        wts = np.asarray(self.weights, dtype=float)
        if pts.ndim != 1 or pts.shape != wts.shape or pts.size == 0:
            raise DomainError("points and weights must be equal-length 1-d sequences")
        if np.any(pts <= 0) or np.any(wts <= 0):
            raise DomainError("points and weights must be positive")
        if abs(wts.sum() - 1.0) > 1e-12:
            raise DomainError("weights must sum to one")
        order = np.argsort(pts)
        object.__setattr__(self, "points", tuple(pts[order]))
        object.__setattr__(self, "weights", tuple(wts[order]))
        object.__setattr__(self, "_pts", pts[order])
        object.__setattr__(self, "_wts", wts[order])

    def tail(self, x):
        x = _as_float(x)
        return _ret(np.sum(np.where(self._pts >= x[..., None], self._wts, 0.0), axis=-1))

    def ppf(self, u):
        u = _as_float(u)
        cum = np.cumsum(self._wts)
        idx = np.minimum(np.searchsorted(cum, u, side="left"), self._pts.size - 1)
        return _ret(self._pts[idx])

    def partial_moment(self, p, lo, hi=np.inf):
        lo, hi = np.broadcast_arrays(_as_float(lo), _as_float(hi))
        sel = (self._pts >= lo[..., None]) & (self._pts < hi[..., None])
        return _ret(np.sum(np.where(sel, self._wts * self._pts**p, 0.0), axis=-1))

    def tilted_ppf(self, p, lo, hi, u):
        lo, hi, u = np.broadcast_arrays(_as_float(lo), _as_float(hi), _as_float(u))
        w = np.where((self._pts >= lo[..., None]) & (self._pts < hi[..., None]), self._wts * self._pts**p, 0.0)
        cum = np.cumsum(w, axis=-1)
        target = u * cum[..., -1]
        idx = np.minimum(np.sum(cum < target[..., None], axis=-1), self._pts.size - 1)
        return _ret(self._pts[idx])

    @property
    def ess_sup(self):
        return float(self._pts[-1])

    @property
    def atoms(self):
        return self._pts.copy(), self._wts.copy()

    def support(self):
        return float(self._pts[0]), float(self._pts[-1])

    def kernel_params(self):
        return self.kind_code, np.concatenate([self._pts, np.cumsum(self._wts)])


@dataclass(frozen=True)
class ParetoDuration:
    """Session duration with ``P(U > u) = (u / u_min)^(-gamma)`` for ``u >= u_min``."""

    gamma: float
    u_min: float = 1.0

    def __post_init__(self):
        if not 1.0 < self.gamma < 2.0:
            raise DomainError("duration tail index must lie in (1, 2)")
        if not self.u_min > 0:
            raise DomainError("u_min must be positive")

    @property
    def c_U(self):
        return self.u_min**self.gamma

    @property
    def mean(self):
        return self.gamma * self.u_min / (self.gamma - 1.0)

    def tail(self, u):
        u = np.maximum(_as_float(u), self.u_min)
        return _ret((u / self.u_min) ** (-self.gamma))

    def ppf(self, w):
        return _ret(self.u_min * (1.0 - _as_float(w)) ** (-1.0 / self.gamma))

    def sample(self, rng, size=None):
        return self.ppf(rng.random(size))

    def backward_ppf(self, w):
        """Inverse CDF of the density ``P(U > x) / E U`` on ``x > 0``.

        This is the law of the time elapsed since the start of a session that
        is active at a fixed instant.
        """
        g, um = self.gamma, self.u_min
        y = _as_float(w) * self.mean
        with np.errstate(invalid="ignore", divide="ignore"):
            far = um * (1.0 - (y - um) * (g - 1.0) / um) ** (-1.0 / (g - 1.0))
        return _ret(np.where(y <= um, y, far))

    def residual_ppf(self, x, w):
        """Inverse CDF of ``U`` conditioned on ``U > x``."""
        base = np.maximum(_as_float(x), self.u_min)
        return _ret(base * (1.0 - _as_float(w)) ** (-1.0 / self.gamma))


_REWARD_KINDS = {
    "degenerate": (Degenerate, ("c",)),
    "uniform": (Uniform, ("b",)),
    "pareto": (Pareto, ("m", "x_min")),
    "truncated_pareto": (TruncatedPareto, ("m", "x_min", "x_max")),
    "discrete": (DiscreteMixture, ("points", "weights")),
}


def reward_from_record(rec):
    """Build a reward law from a tagged record such as ``{"kind": "uniform", "b": 1.0}``."""
    rec = dict(rec)
    kind = rec.pop("kind", None)
    if kind not in _REWARD_KINDS:
        raise DomainError(f"unknown reward kind {kind!r}; expected one of {sorted(_REWARD_KINDS)}")
    cls, names = _REWARD_KINDS[kind]
    unknown = set(rec) - set(names)
    if unknown:
        raise DomainError(f"unexpected keys for {kind} reward: {sorted(unknown)}")
    if kind == "discrete":
        return cls(tuple(rec["points"]), tuple(rec["weights"]))
    return cls(**{k: float(v) for k, v in rec.items()})


def duration_from_record(rec):
    rec = dict(rec)
    kind = rec.pop("kind", "pareto")
    if kind != "pareto":
        raise DomainError(f"unknown duration kind {kind!r}; only 'pareto' is supported")
    unknown = set(rec) - {"gamma", "u_min"}
    if unknown:
        raise DomainError(f"unexpected keys for pareto duration: {sorted(unknown)}")
    return ParetoDuration(**{k: float(v) for k, v in rec.items()})


def law_to_record(law):
    if isinstance(law, ParetoDuration):
        return {"kind": "pareto", "gamma": law.gamma, "u_min": law.u_min}
    cls, names = _REWARD_KINDS[law.kind]
    rec = {"kind": law.kind}
    for n in names:
        v = getattr(law, n)
        rec[n] = list(v) if isinstance(v, tuple) else v
    return rec
