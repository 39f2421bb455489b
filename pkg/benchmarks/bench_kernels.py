"""Compare the numba and numpy paths of the hot kernels.

Run ``python benchmarks/bench_kernels.py [--sessions N] [--replicates R] [--draws M] [--repeat K]``.
Each kernel is timed on both backends with identical inputs (best of
``--repeat`` runs, numba compile time excluded) and the outputs are compared.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from telecom_lde import _backend, kernels
from telecom_lde.distributions import ParetoDuration, Uniform
from telecom_lde.rng import Purpose, stream_keys, uniforms_at


def best_of(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_workload(sessions, replicates, repeat):
    dur = ParetoDuration(1.5, 1.0)
    kind, params = Uniform(1.0).kernel_params()
    reps = np.arange(replicates)
    n_sess = np.full(replicates, sessions, dtype=np.int64)
    n_past = np.full(replicates, max(1, sessions // 10), dtype=np.int64)
    ks, kp = stream_keys(1, reps, Purpose.SESSIONS), stream_keys(1, reps, Purpose.PAST_SESSIONS)
    a = float(sessions)
    args = (n_sess, n_past, ks, kp, a, 1.5, dur.u_min, dur.mean, kind, params, np.array([0.5 * a, a]))
    kernels.workload(*args[:-1], np.array([a]), backend="numba")  # compile
    t_nb, w_nb = best_of(lambda: kernels.workload(*args, backend="numba"), repeat)
    t_np, w_np = best_of(lambda: kernels.workload(*args, backend="numpy"), repeat)
    events = int(n_sess.sum() + n_past.sum())
    return t_nb, t_np, events, float(np.max(np.abs(w_nb - w_np) / np.maximum(np.abs(w_np), 1.0)))


def bench_ell_inverse(draws, repeat):
    u = uniforms_at(stream_keys(2, np.zeros(draws, dtype=np.int64), Purpose.SMALL_ELL), np.arange(draws, dtype=np.uint64))
    lo = np.full(draws, 0.01)
    hi = np.full(draws, np.inf)
    kernels.ell_inverse(10.0, 1.5, lo[:10], hi[:10], u[:10], backend="numba")
    t_nb, x_nb = best_of(lambda: kernels.ell_inverse(10.0, 1.5, lo, hi, u, backend="numba"), repeat)
    t_np, x_np = best_of(lambda: kernels.ell_inverse(10.0, 1.5, lo, hi, u, backend="numpy"), repeat)
    return t_nb, t_np, draws, float(np.max(np.abs(x_nb - x_np) / x_np))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--sessions", type=int, default=100_000, help="sessions per replicate")
    ap.add_argument("--replicates", type=int, default=50)
    ap.add_argument("--draws", type=int, default=2_000_000, help="overlap-length draws")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=0)
    args = ap.parse_args(argv)
    if not _backend.HAS_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    _backend.set_threads(args.threads)
    print(f"{'kernel':<14}{'items':>12}{'numba s':>11}{'numpy s':>11}{'ns/item nb':>12}{'ns/item np':>12}{'speedup':>9}{'max rel diff':>14}")
    for name, (t_nb, t_np, n, diff) in (
        ("workload", bench_workload(args.sessions, args.replicates, args.repeat)),
        ("ell_inverse", bench_ell_inverse(args.draws, args.repeat)),
    ):
        print(f"{name:<14}{n:>12d}{t_nb:>11.3f}{t_np:>11.3f}{1e9 * t_nb / n:>12.1f}{1e9 * t_np / n:>12.1f}{t_np / t_nb:>9.1f}{diff:>14.2e}")


if __name__ == "__main__":
    main()
