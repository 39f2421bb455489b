"""Hot loops, each in a numba version and a pure-numpy version.

Both versions consume the same counter-based uniforms in the same order and
accumulate sums sequentially, so they agree to the last bit up to differences
in the platform ``pow``/``log`` implementations.  ``_backend.BACKEND`` picks
the version the library calls; the benchmark times both.
"""

import math

import numpy as np

from . import _backend
from ._backend import njit, prange
from .rng import uniform_scalar, uniforms_at

# ----------------------------------------------------------------------------
# Poisson counts from a counter-based stream
# ----------------------------------------------------------------------------


@njit
def poisson_scalar(key, mean):
    """Poisson draw using counters 0, 1, 2, ... of ``key``.

    Sequential-search inversion for ``mean < 10``, transformed rejection with
    squeeze (PTRS) otherwise; both exact.
    """
    if mean <= 0.0:
        return 0
    c = np.uint64(0)
    if mean < 10.0:
        u = uniform_scalar(key, c)
        p = math.exp(-mean)
        f = p
        k = 0
        while u > f and k < 1000:
            k += 1
            p *= mean / k
            f += p
        return k
    slam = math.sqrt(mean)
    loglam = math.log(mean)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        U = uniform_scalar(key, c) - 0.5
        V = uniform_scalar(key, c + np.uint64(1))
        c += np.uint64(2)
        us = 0.5 - abs(U)
        k = math.floor((2.0 * a / us + b) * U + mean + 0.43)
        if us >= 0.07 and V <= vr:
            return int(k)
        if k < 0 or (us < 0.013 and V > us):
            continue
        if math.log(V) + math.log(invalpha) - math.log(a / (us * us) + b) <= -mean + k * loglam - math.lgamma(k + 1.0):
            return int(k)


@njit
def _poisson_many_nb(keys, means):
    out = np.empty(keys.size, dtype=np.int64)
    for i in range(keys.size):
        out[i] = poisson_scalar(keys[i], means[i])
    return out


def poisson_counts(keys, means):
    """Poisson counts, one per stream key."""
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    means = np.broadcast_to(np.asarray(means, dtype=float), keys.shape).copy()
    if _backend.BACKEND == "numba":
        return _poisson_many_nb(keys, means)
    f = getattr(poisson_scalar, "py_func", poisson_scalar)
    return np.array([f(k, m) for k, m in zip(keys, means)], dtype=np.int64)


# ----------------------------------------------------------------------------
# reward inverse CDF by kind code
# ----------------------------------------------------------------------------


@njit(inline="always")
def reward_ppf_scalar(kind, params, w):
    if kind == 0:
        return params[0]
    if kind == 1:
        return params[0] * w
    if kind == 2:
        return params[1] * w ** (-1.0 / params[0])
    if kind == 3:
        mass = 1.0 - (params[1] / params[2]) ** params[0]
        return params[1] * (1.0 - w * mass) ** (-1.0 / params[0])
    n = params.size // 2
    for j in range(n):
        if w <= params[n + j]:
            return params[j]
    return params[n - 1]


def reward_ppf_vector(kind, params, w):
    if kind == 0:
        return np.full(w.shape, params[0])
    if kind == 1:
        return params[0] * w
    if kind == 2:
        return params[1] * w ** (-1.0 / params[0])
    if kind == 3:
        mass = 1.0 - (params[1] / params[2]) ** params[0]
        return params[1] * (1.0 - w * mass) ** (-1.0 / params[0])
    n = params.size // 2
    idx = np.minimum(np.searchsorted(params[n:], w, side="left"), n - 1)
    return params[idx]


# ----------------------------------------------------------------------------
# pre-limit workload
# ----------------------------------------------------------------------------


@njit(inline="always")
def _backward_ppf(w, gamma, u_min, mean_u):
    y = w * mean_u
    if y <= u_min:
        return y
    return u_min * (1.0 - (y - u_min) * (gamma - 1.0) / u_min) ** (-1.0 / (gamma - 1.0))


@njit(parallel=True)
def _workload_nb(n_sess, n_past, k_sess, k_past, a, gamma, u_min, mean_u, kind, rparams, horizons):
    n_rep = n_sess.size
    g_n = horizons.size
    out = np.zeros((n_rep, g_n))
    ig = -1.0 / gamma
    for i in prange(n_rep):
        acc = np.zeros(g_n)
        ks = k_sess[i]
        for j in range(n_sess[i]):
            c = np.uint64(3 * j)
            s = a * uniform_scalar(ks, c)
            u = u_min * math.exp(ig * math.log(uniform_scalar(ks, c + np.uint64(1))))
            r = reward_ppf_scalar(kind, rparams, uniform_scalar(ks, c + np.uint64(2)))
            e = s + u
            for k in range(g_n):
                T = horizons[k]
                if s < T:
                    acc[k] += r * (min(e, T) - s)
        kp = k_past[i]
        for j in range(n_past[i]):
            c = np.uint64(3 * j)
            x = _backward_ppf(uniform_scalar(kp, c), gamma, u_min, mean_u)
            u = max(x, u_min) * math.exp(ig * math.log(uniform_scalar(kp, c + np.uint64(1))))
            r = reward_ppf_scalar(kind, rparams, uniform_scalar(kp, c + np.uint64(2)))
            e = u - x
            for k in range(g_n):
                acc[k] += r * min(e, horizons[k])
        for k in range(g_n):
            out[i, k] = acc[k]
    return out


def _seq_sum(x, start):
    # sequential left-to-right sum, matching the compiled loop bit for bit
    return np.cumsum(np.concatenate(([start], x)))[-1]


def _workload_np(n_sess, n_past, k_sess, k_past, a, gamma, u_min, mean_u, kind, rparams, horizons, chunk=1 << 20):
    n_rep, g_n = n_sess.size, horizons.size
    out = np.zeros((n_rep, g_n))
    ig = -1.0 / gamma
    for i in range(n_rep):
        acc = np.zeros(g_n)
        for j0 in range(0, int(n_sess[i]), chunk):
            j = np.arange(j0, min(j0 + chunk, int(n_sess[i])), dtype=np.uint64) * np.uint64(3)
            key = np.full(j.size, k_sess[i], dtype=np.uint64)
            s = a * uniforms_at(key, j)
            u = u_min * np.exp(ig * np.log(uniforms_at(key, j + np.uint64(1))))
            r = reward_ppf_vector(kind, rparams, uniforms_at(key, j + np.uint64(2)))
            e = s + u
            for k in range(g_n):
                T = horizons[k]
                contrib = np.where(s < T, r * (np.minimum(e, T) - s), 0.0)
                acc[k] = _seq_sum(contrib[s < T], acc[k])
        if n_past[i]:
            j = np.arange(int(n_past[i]), dtype=np.uint64) * np.uint64(3)
            key = np.full(j.size, k_past[i], dtype=np.uint64)
            w = uniforms_at(key, j) * mean_u
            with np.errstate(invalid="ignore"):
                far = u_min * (1.0 - (w - u_min) * (gamma - 1.0) / u_min) ** (-1.0 / (gamma - 1.0))
            x = np.where(w <= u_min, w, far)
            u = np.maximum(x, u_min) * np.exp(ig * np.log(uniforms_at(key, j + np.uint64(1))))
            r = reward_ppf_vector(kind, rparams, uniforms_at(key, j + np.uint64(2)))
            e = u - x
            for k in range(g_n):
                acc[k] = _seq_sum(r * np.minimum(e, horizons[k]), acc[k])
        out[i] = acc
    return out


def workload(n_sess, n_past, k_sess, k_past, a, gamma, u_min, mean_u, kind, rparams, horizons, backend=None):
    """Integral workload ``sum r * ell_T(s, u)`` per replicate and horizon ``T``.

    Sessions ``j`` of replicate ``i`` arriving in ``[0, a]`` read uniforms
    ``3j, 3j+1, 3j+2`` of ``k_sess[i]`` for arrival time, duration and reward;
    sessions active at time 0 read the same layout from ``k_past[i]`` for
    elapsed time, duration and reward.
    """
    backend = backend or _backend.BACKEND
    args = (
        np.ascontiguousarray(n_sess, dtype=np.int64),
        np.ascontiguousarray(n_past, dtype=np.int64),
        np.ascontiguousarray(k_sess, dtype=np.uint64),
        np.ascontiguousarray(k_past, dtype=np.uint64),
        float(a), float(gamma), float(u_min), float(mean_u), int(kind),
        np.ascontiguousarray(rparams, dtype=float),
        np.ascontiguousarray(horizons, dtype=float),
    )
    if backend == "numba" and _backend.HAS_NUMBA:
        return _workload_nb(*args)
    return _workload_np(*args)


# ----------------------------------------------------------------------------
# inverse of the overlap-length tail on a band
# ----------------------------------------------------------------------------


@njit(inline="always")
def _ell_f(t, g, c2, x):
    return t * x ** (-g) / g + c2 * x ** (1.0 - g)


@njit(parallel=True)
def _ell_inverse_nb(t, g, lo, hi, u):
    n = u.size
    out = np.empty(n)
    c2 = (2.0 - g) / ((g - 1.0) * g)
    kk = (2.0 - g) / g
    atom = c2 * t ** (1.0 - g) / (2.0 - g)
    for i in prange(n):
        a, b = lo[i], hi[i]
        if a >= t:
            out[i] = t
            continue
        ta = _ell_f(t, g, c2, a)
        tb = _ell_f(t, g, c2, b) if b <= t else 0.0
        y = ta - u[i] * (ta - tb)
        if b > t and y <= atom:
            out[i] = t
            continue
        x = max(a, (g * y / t) ** (-1.0 / g), (y / c2) ** (-1.0 / (g - 1.0)))
        for _ in range(60):
            p = math.exp(-g * math.log(x))  # x^-gamma; one exp/log pair per step
            step = (p * (t / g + c2 * x) - y) / (p * (t / x + kk))
            x += step
            if abs(step) <= 1e-14 * x:
                break
        out[i] = min(x, min(b, t))
    return out


def _ell_inverse_np(t, g, lo, hi, u):
    c2 = (2.0 - g) / ((g - 1.0) * g)
    kk = (2.0 - g) / g
    atom = c2 * t ** (1.0 - g) / (2.0 - g)
    out = np.full(u.shape, float(t))
    live = lo < t
    a, b, uu = lo[live], hi[live], u[live]
    ta = _ell_f(t, g, c2, a)
    with np.errstate(divide="ignore", over="ignore"):
        tb = np.where(b <= t, _ell_f(t, g, c2, np.minimum(b, t)), 0.0)
    y = ta - uu * (ta - tb)
    to_atom = (b > t) & (y <= atom)
    x = np.maximum(np.maximum(a, (g * y / t) ** (-1.0 / g)), (y / c2) ** (-1.0 / (g - 1.0)))
    act = ~to_atom
    for _ in range(60):
        idx = np.flatnonzero(act)
        if idx.size == 0:
            break
        xi = x[idx]
        p = np.exp(-g * np.log(xi))
        step = (p * (t / g + c2 * xi) - y[idx]) / (p * (t / xi + kk))
        xi = xi + step
        x[idx] = xi
        act[idx[np.abs(step) <= 1e-14 * xi]] = False
    res = np.where(to_atom, t, np.minimum(x, np.minimum(b, t)))
    out[live] = res
    return out


def ell_inverse(t, gamma, lo, hi, u, backend=None):
    """Draw from ``mu_ell`` restricted to ``[lo, hi)`` by inverting its tail at ``u``.

    The atom at ``t`` is a separate branch; elsewhere Newton's method runs on
    the convex, decreasing tail from a starting point left of the root, so the
    iterates increase monotonically.
    """
    backend = backend or _backend.BACKEND
    u = np.ascontiguousarray(u, dtype=float)
    lo = np.ascontiguousarray(np.broadcast_to(lo, u.shape), dtype=float)
    hi = np.ascontiguousarray(np.broadcast_to(hi, u.shape), dtype=float)
    if backend == "numba" and _backend.HAS_NUMBA:
        return _ell_inverse_nb(float(t), float(gamma), lo, hi, u)
    return _ell_inverse_np(float(t), float(gamma), lo, hi, u)


# ----------------------------------------------------------------------------
# per-owner sums
# ----------------------------------------------------------------------------


@njit
def _segment_sum_nb(owner, vals, n):
    out = np.zeros(n)
    for j in range(owner.size):
        out[owner[j]] += vals[j]
    return out


def segment_sum(owner, vals, n, backend=None):
    """Sequential per-owner sums (``bincount`` accumulates in input order too)."""
    backend = backend or _backend.BACKEND
    owner = np.ascontiguousarray(owner, dtype=np.int64)
    vals = np.ascontiguousarray(vals, dtype=float)
    if backend == "numba" and _backend.HAS_NUMBA:
        return _segment_sum_nb(owner, vals, int(n))
    return np.bincount(owner, weights=vals, minlength=int(n)).astype(float)
