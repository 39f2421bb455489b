"""Experiment runners, result files and plot-ready tables.

Each experiment produces rows with the fixed columns of ``COLUMNS`` plus a
summary record.  ``write_outputs`` stores them as ``results.csv``,
``summary.json`` (deterministic given config and seed) and ``timing.json``
(wall time, the only run-dependent output).
"""

from __future__ import annotations

import csv
import io
import json
import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import _backend
from .config import ExperimentConfig
from .errors import ConfigurationError, CriticalCaseError, NonFiniteResultError, ResultsParseError
from .lde import (
    intermediate_constant_1,
    intermediate_constant_n,
    moderate_asymptotic,
    moderate_constant,
    required_sessions,
    tail_estimate_conditional,
    tail_estimate_crude,
    ultra_asymptotic,
    ultra_constant,
)
from .measures import NuMeasure, TailMeasure, TelecomParams, mu_ell_atom, mu_ell_density, mu_ell_tail, quad
from .simulator import ServiceSystemParams, SplitConfig, simulate_telecom_batch, simulate_Z_a
from .stable import StableSpec, cdf_grid, ks_one_sample

COLUMNS = ("experiment", "t", "rho", "p_hat", "ci_low", "ci_high", "theory", "ratio", "method", "replicates", "seed")
PLOT_COLUMNS = ("series", "x", "y", "y_low", "y_high")
KS_C95 = 1.358  # asymptotic 95% quantile of the Kolmogorov distribution


@dataclass
class RunResult:
    experiment: str
    rows: list
    summary: dict
    ok: bool = True
    failures: list = field(default_factory=list)
    wall_time: float = 0.0


def _row(cfg, t, rho, p_hat, ci_low, ci_high, theory, method, replicates):
    ratio = p_hat / theory if theory != 0 else math.nan
    return {
        "experiment": cfg.experiment, "t": float(t), "rho": float(rho), "p_hat": float(p_hat),
        "ci_low": float(ci_low), "ci_high": float(ci_high), "theory": float(theory), "ratio": float(ratio),
        "method": method, "replicates": int(replicates), "seed": int(cfg.seed),
    }


# ----------------------------------------------------------------------------
# measure identities
# ----------------------------------------------------------------------------


def measure_identities():
    """Deterministic identities of the overlap and workload-jump measures.

    Returns a list of dicts with ``name``, ``value``, ``reference``, ``ok`` and
    the grid point ``(t, v)`` the check was made at.
    """
    from .distributions import Degenerate, Pareto, Uniform

    checks = []

    def add(name, value, reference, ok, t=0.0, v=0.0):
        checks.append({"name": name, "value": float(value), "reference": float(reference), "ok": bool(ok), "t": t, "v": v})

    g = 1.5
    # tail differences against the integrated density
    worst = 0.0
    for t in (1.0, 10.0, 1e3):
        for a, b in ((0.01, 0.5), (0.1, 0.9), (0.3, 0.999)):
            lo, hi = a * t, b * t
            d = mu_ell_tail(t, g, lo) - mu_ell_tail(t, g, hi)
            q = quad(lambda x: mu_ell_density(t, g, x), lo, hi, epsrel=1e-12)
            worst = max(worst, abs(d - q) / abs(q))
    add("ell_tail_vs_density", worst, 1e-9, worst <= 1e-9)
    # atom: the tail just below t minus the density mass on [ell0, t)
    t = 4.0
    e0 = t * (1 - 1e-9)
    atom_num = mu_ell_tail(t, g, e0) - quad(lambda x: mu_ell_density(t, g, x), e0, t, epsrel=1e-12)
    err = abs(atom_num - mu_ell_atom(t, g)) / mu_ell_atom(t, g)
    add("ell_atom", atom_num, mu_ell_atom(t, g), err <= 1e-6, t=t)
    # nu equals the overlap measure at t = 1
    s = np.linspace(1e-3, 1.0, 200)
    nu = NuMeasure(g)
    err = float(np.max(np.abs(nu.tail(s) - mu_ell_tail(1.0, g, s)) / mu_ell_tail(1.0, g, s)))
    add("nu_vs_ell_t1", err, 1e-12, err <= 1e-12, t=1.0)
    # tail bound on a log grid
    for name, law in (("uniform", Uniform(1.0)), ("degenerate", Degenerate(1.0)), ("pareto3", Pareto(3.0, 1.0))):
        m = TailMeasure(10.0, TelecomParams(1.0, g), law)
        v = np.geomspace(1e-3, 1e3, 50)
        r = float(np.max(m.tail(v) / m.tail_bound(v)))
        add(f"tail_bound_{name}", r, 1.0, r <= 1.0, t=10.0)
    # asymptotic tail for v << t
    m = TailMeasure(1e8, TelecomParams(1.0, g), Uniform(1.0))
    r = m.tail(1e4) / m.tail_asymptotic(1e4)
    add("tail_asymptotic_ratio", r, 1.0, 0.97 <= r <= 1.03, t=1e8, v=1e4)
    # closed forms against quadrature
    for name, law in (("uniform", Uniform(1.0)), ("pareto3", Pareto(3.0, 1.0))):
        m = TailMeasure(10.0, TelecomParams(1.0, g), law)
        v = np.geomspace(0.05, 50.0, 12)
        c, q = m.tail(v), m.tail(v, method="quad")
        pos = q > 0
        err = float(np.max(np.abs(c[pos] - q[pos]) / q[pos]))
        add(f"tail_closed_vs_quad_{name}", err, 1e-8, err <= 1e-8, t=10.0)
        err = abs(m.mean_above(1.0) - m.mean_above_quad(1.0)) / m.mean_above_quad(1.0)
        add(f"mean_above_closed_vs_quad_{name}", err, 1e-8, err <= 1e-8, t=10.0, v=1.0)
    return checks


# ----------------------------------------------------------------------------
# experiments
# ----------------------------------------------------------------------------


def _run_selftest(cfg):
    checks = measure_identities()
    rows = []
    for c in checks:
        # ratio column: value / reference; the pass rule lives in the summary
        rows.append(_row(cfg, c["t"], c["v"], c["value"], c["value"], c["value"], c["reference"], c["name"], 0))
    failures = [c["name"] for c in checks if not c["ok"]]
    return rows, {"checks": checks}, failures


def _run_constants(cfg):
    g, Q = cfg.gamma, cfg.Q
    law = cfg.reward_law()
    rows, diag = [], {}
    er = law.moment(g)
    rows.append(_row(cfg, 1.0, 0.0, moderate_constant(Q, g, er), moderate_constant(Q, g, er), moderate_constant(Q, g, er),
                     moderate_constant(Q, g, er), "moderate-D", 0))
    if law.tail_index is not None and law.tail_index > g:
        d = ultra_constant(law.tail_index, g)
        rows.append(_row(cfg, 1.0, 0.0, d, d, d, d, "ultra-D", 0))
    for kappa in cfg.kappas:
        try:
            sc = required_sessions(law, kappa)
        except CriticalCaseError as e:
            diag[f"kappa={kappa!r}"] = {"skipped": str(e)}
            continue
        diag[f"kappa={kappa!r}"] = {"n": sc.n, "eta": sc.eta, "zeta": sc.zeta, "s_star": sc.s_star, "s_min": sc.s_min}
        if sc.n == 1:
            ref = intermediate_constant_1(g, law, kappa)
            rows.append(_row(cfg, 1.0, kappa, ref, ref, ref, ref, "D1-closed", 0))
        else:
            q = intermediate_constant_n(g, law, kappa, n=sc.n, method="quad")
            ref = q.value
            rows.append(_row(cfg, 1.0, kappa, ref, ref, ref, ref, f"D{sc.n}-quad", 0))
        if math.isfinite(law.ess_sup):  # MC needs a positive cutoff s_min
            mc = intermediate_constant_n(g, law, kappa, n=sc.n, replicates=cfg.constant_replicates, seed=cfg.seed)
            rows.append(_row(cfg, 1.0, kappa, mc.value, mc.ci_low, mc.ci_high, ref, f"D{sc.n}-mc", mc.replicates))
    return rows, {"sessions": diag}, []


def _ks_series(samples, spec, n_points=201):
    xs = np.quantile(samples, np.linspace(0.005, 0.995, n_points))
    ecdf = np.searchsorted(np.sort(samples), xs, side="right") / samples.size
    band = math.sqrt(math.log(2.0 / 0.05) / (2.0 * samples.size))  # DKW 95% band
    return {
        "x": xs.tolist(),
        "empirical_cdf": ecdf.tolist(),
        "empirical_low": np.clip(ecdf - band, 0.0, 1.0).tolist(),
        "empirical_high": np.clip(ecdf + band, 0.0, 1.0).tolist(),
        "stable_cdf": cdf_grid(spec, xs).tolist(),
    }


def _run_limit_check(cfg):
    g, Q = cfg.gamma, cfg.Q
    law = cfg.reward_law()
    N = cfg.replicates
    spec = StableSpec(Q, g)
    rows, series, diag = [], {}, {}
    crit = KS_C95 / math.sqrt(N)
    for t in cfg.t_grid:
        m = TailMeasure(t, cfg.params(), law)
        split = SplitConfig.from_h(cfg.h, t, residual=cfg.residual, skew_tol=cfg.skew_tol)
        b = simulate_telecom_batch(m, split, cfg.seed, N, Q=Q)
        x = b.value / (law.moment(g) * t) ** (1.0 / g)
        ks = ks_one_sample(spec, x)
        rows.append(_row(cfg, t, 0.0, ks, ks, ks, crit, "ks-stable", N))
        series[f"t={t!r}"] = _ks_series(x, spec)
        diag[f"t={t!r}"] = {"p_value": float(stats.kstwo.sf(ks, N)), **b.split.diagnostics()}
    if cfg.a is not None:
        dur = cfg.duration_law()
        if abs(dur.gamma - g) > 1e-12:
            raise ConfigurationError("duration gamma must equal params.gamma")
        p = ServiceSystemParams.critical(cfg.L, cfg.a, dur, law)
        tp = p.telecom_params()
        z = simulate_Z_a(p, [1.0], cfg.seed, N)[:, 0]
        m1 = TailMeasure(1.0, tp, law)
        y = simulate_telecom_batch(m1, SplitConfig.from_h(cfg.h, 1.0, residual=cfg.residual, skew_tol=cfg.skew_tol), cfg.seed, N).value
        ks2 = stats.ks_2samp(z, y)
        crit2 = KS_C95 * math.sqrt(2.0 / N)
        rows.append(_row(cfg, 1.0, 0.0, ks2.statistic, ks2.statistic, ks2.statistic, crit2, "ks2-prelimit", N))
        diag["prelimit"] = {"a": cfg.a, "lam": p.lam, "Q_limit": tp.Q, "p_value": float(ks2.pvalue),
                            "expected_events": p.expected_events, "mean_Z": float(z.mean())}
    return rows, {"series": series, "diagnostics": diag}, []


def _tail_estimate(cfg, m, rho, v0):
    split = SplitConfig(v0, residual=cfg.residual, skew_tol=cfg.skew_tol)
    if cfg.estimator == "crude":
        return tail_estimate_crude(m, cfg.Q, split, rho, cfg.replicates, cfg.seed)
    return tail_estimate_conditional(m, cfg.Q, split, rho, cfg.replicates, cfg.seed, n_max=cfg.n_max)


def _run_tail_grid(cfg, theory_fn, scale):
    """Estimate ``P(Y(t) >= rho)`` on ``t_grid`` (same seed at every point)."""
    law = cfg.reward_law()
    rows, diag = [], {}
    for i, t in enumerate(cfg.t_grid):
        rho = cfg.rho_for(i, t)
        m = TailMeasure(t, cfg.params(), law)
        v0 = cfg.h * (rho if scale == "rho" else min(t, rho))
        est = _tail_estimate(cfg, m, rho, v0)
        theory = theory_fn(m, t, rho)
        rows.append(_row(cfg, t, rho, est.p_hat, est.ci_low, est.ci_high, theory, est.method, est.replicates))
        diag[f"t={t!r}"] = est.diagnostics
    return rows, diag


def _run_moderate(cfg):
    law = cfg.reward_law()
    er = law.moment(cfg.gamma)
    rows, diag = _run_tail_grid(cfg, lambda m, t, rho: moderate_asymptotic(cfg.Q, cfg.gamma, er, t, rho), "rho")
    return rows, {"diagnostics": diag, "constant": moderate_constant(cfg.Q, cfg.gamma, er)}, []


def _run_intermediate(cfg):
    if cfg.rho_rule != "kappa":
        raise ConfigurationError("ld-intermediate needs rho.rule = 'kappa'")
    law = cfg.reward_law()
    d1 = intermediate_constant_1(cfg.gamma, law, cfg.kappa)
    theory = lambda m, t, rho: cfg.Q * d1 * t ** (-(cfg.gamma - 1.0))
    rows, diag = _run_tail_grid(cfg, theory, "t")
    return rows, {"diagnostics": diag, "constant": d1, "sessions": 1}, []


def _log_slope(rows):
    t = np.log([r["t"] for r in rows])
    p = [r["p_hat"] for r in rows]
    if len(rows) < 2 or min(p) <= 0:
        return None
    return float(np.polyfit(t, np.log(p), 1)[0])


def _run_multisession(cfg):
    if cfg.rho_rule != "kappa":
        raise ConfigurationError("ld-multisession needs rho.rule = 'kappa'")
    law = cfg.reward_law()
    sc = required_sessions(law, cfg.kappa)
    n = sc.n
    if n <= 2:
        dn = intermediate_constant_n(cfg.gamma, law, cfg.kappa, n=n, method="quad")
    else:
        dn = intermediate_constant_n(cfg.gamma, law, cfg.kappa, n=n, replicates=cfg.constant_replicates, seed=cfg.seed)
    theory = lambda m, t, rho: cfg.Q**n * dn.value * t ** (-(cfg.gamma - 1.0) * n)
    rows, diag = _run_tail_grid(cfg, theory, "t")
    summary = {
        "diagnostics": diag,
        "sessions": n,
        "session_count": {"n": n, "eta": sc.eta, "zeta": sc.zeta, "s_star": sc.s_star, "s_min": sc.s_min},
        "constant": dn.value,
        "constant_ci": [dn.ci_low, dn.ci_high],
        "slope": _log_slope(rows),
        "slope_expected": -(cfg.gamma - 1.0) * n,
    }
    return rows, summary, []


def _run_ultra(cfg):
    law = cfg.reward_law()
    theory = lambda m, t, rho: ultra_asymptotic(cfg.Q, cfg.gamma, law, t, rho)
    rows, diag = _run_tail_grid(cfg, theory, "t")
    return rows, {"diagnostics": diag, "constant": ultra_constant(law.tail_index, cfg.gamma)}, []


_RUNNERS = {
    "measure-selftest": _run_selftest,
    "constants": _run_constants,
    "limit-check": _run_limit_check,
    "ld-moderate": _run_moderate,
    "ld-intermediate": _run_intermediate,
    "ld-multisession": _run_multisession,
    "ld-ultra": _run_ultra,
}


def versions():
    import scipy

    from . import __version__

    out = {"telecom_lde": __version__, "python": platform.python_version(), "numpy": np.__version__,
           "scipy": scipy.__version__, "backend": _backend.BACKEND}
    if _backend.HAS_NUMBA:
        import numba

        out["numba"] = numba.__version__
    return out


def run(cfg: ExperimentConfig) -> RunResult:
    """Run one experiment; raises on validation or numeric failure."""
    _backend.set_threads(cfg.threads)
    t0 = time.perf_counter()
    rows, extra, failures = _RUNNERS[cfg.experiment](cfg)
    wall = time.perf_counter() - t0
    check_finite(rows)
    record = cfg.to_record()
    # output location and thread count never change results
    record.pop("out")
    record.pop("threads")
    summary = {"experiment": cfg.experiment, "config": record, "versions": versions(), "rows": len(rows),
               "failures": failures, **extra}
    return RunResult(cfg.experiment, rows, summary, ok=not failures, failures=failures, wall_time=wall)


def check_finite(rows):
    for r in rows:
        for k in COLUMNS:
            v = r[k]
            if isinstance(v, float) and not math.isfinite(v):
                raise NonFiniteResultError(f"non-finite {k} in row {r['method']} at t={r['t']}")


# ----------------------------------------------------------------------------
# files
# ----------------------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (float, np.floating)):
        # diagnostics may legitimately be undefined (e.g. zeta for unbounded rewards)
        return float(x) if math.isfinite(x) else None
    return x


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(r[k]) if isinstance(r[k], float) else r[k] for k in COLUMNS})
    return buf.getvalue()


def write_outputs(result: RunResult, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(rows_to_csv(result.rows), encoding="utf-8")
    (out / "summary.json").write_text(json.dumps(_jsonable(result.summary), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / "timing.json").write_text(json.dumps({"wall_time_s": result.wall_time}, indent=2) + "\n", encoding="utf-8")
    return out


def write_error(out_dir, exc, code):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rec = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    (out / "error.json").write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return rec


# ----------------------------------------------------------------------------
# plot data
# ----------------------------------------------------------------------------


def read_results(path):
    """Rows of a ``results.csv`` (or of the one inside a run directory)."""
    p = Path(path)
    if p.is_dir():
        p = p / "results.csv"
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ResultsParseError(f"cannot read {p}: {e}") from e
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or tuple(reader.fieldnames) != COLUMNS:
        raise ResultsParseError(f"{p}: header must be {','.join(COLUMNS)}")
    rows = []
    for i, rec in enumerate(reader, start=2):
        if None in rec or any(v is None for v in rec.values()):
            raise ResultsParseError(f"{p}:{i}: wrong number of fields")
        try:
            row = {k: float(rec[k]) for k in ("t", "rho", "p_hat", "ci_low", "ci_high", "theory", "ratio")}
            row.update(experiment=rec["experiment"], method=rec["method"], replicates=int(rec["replicates"]), seed=int(rec["seed"]))
        except ValueError as e:
            raise ResultsParseError(f"{p}:{i}: {e}") from e
        rows.append(row)
    return rows


def _read_summary(path):
    p = Path(path)
    s = (p if p.is_dir() else p.parent) / "summary.json"
    if not s.exists():
        return {}
    try:
        return json.loads(s.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ResultsParseError(f"{s}: {e}") from e


def plot_records(rows, summary=None):
    """Long-form ``(series, x, y, y_low, y_high)`` records from result rows."""
    summary = summary or {}
    recs = []
    if not rows:
        return recs
    exp = rows[0]["experiment"]
    gamma = summary.get("config", {}).get("gamma", 1.5)
    if exp.startswith("ld-"):
        for r in rows:
            recs.append(("p_hat", r["t"], r["p_hat"], r["ci_low"], r["ci_high"]))
            recs.append(("theory", r["t"], r["theory"], r["theory"], r["theory"]))
        if exp in ("ld-intermediate", "ld-multisession"):
            n = int(summary.get("sessions", 1))
            Q = summary.get("config", {}).get("Q", 1.0)
            label = "p_hat*t^(gamma-1)" if n == 1 else f"p_hat*t^((gamma-1)*{n})"
            for r in rows:
                s = r["t"] ** ((gamma - 1.0) * n)
                recs.append((label, r["t"], r["p_hat"] * s, r["ci_low"] * s, r["ci_high"] * s))
            if "constant" in summary:
                c = Q**n * summary["constant"]
                for r in rows:
                    recs.append(("theory_constant", r["t"], c, c, c))
    elif exp == "limit-check":
        for key, s in sorted(summary.get("series", {}).items()):
            for x, y, lo, hi, st in zip(s["x"], s["empirical_cdf"], s["empirical_low"], s["empirical_high"], s["stable_cdf"]):
                recs.append((f"empirical_cdf[{key}]", x, y, lo, hi))
                recs.append((f"stable_cdf[{key}]", x, st, st, st))
        for r in rows:
            recs.append((r["method"], r["t"], r["p_hat"], r["ci_low"], r["ci_high"]))
    else:
        for r in rows:
            recs.append((r["method"], r["rho"], r["p_hat"], r["ci_low"], r["ci_high"]))
    return recs


def emit_plot_data(path, out=None):
    """Long-form CSV for plotting; returns the text and writes it to ``out`` if given."""
    rows = read_results(path)
    recs = plot_records(rows, _read_summary(path) if rows else {})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PLOT_COLUMNS)
    for s, *nums in recs:
        if not all(math.isfinite(v) for v in nums):
            raise NonFiniteResultError(f"non-finite value in series {s}")
        w.writerow([s, *(repr(float(v)) for v in nums)])
    text = buf.getvalue()
    if out is not None:
        Path(out).write_text(text, encoding="utf-8")
    return text
