"""``telecom-lde`` command line driver.

``telecom-lde <experiment> [--config PATH] [--seed N] [--replicates N] [--threads N] [--out DIR]``
runs one experiment and writes ``results.csv``, ``summary.json`` and
``timing.json`` into ``DIR``.  ``telecom-lde plot-data RESULTS [--out FILE]``
turns a results directory into a long-form plotting table.

Exit codes: 0 success, 2 invalid input, 3 numeric failure (including failed
self-test identities), 1 anything else.  Failures leave ``error.json`` in the
output directory.
"""

from __future__ import annotations

import argparse
import sys
import warnings

from .config import EXPERIMENTS, default_config, load_config
from .errors import TelecomError

EXIT_OK, EXIT_OTHER, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


def exit_code_for(exc):
    if isinstance(exc, ArithmeticError):
        return EXIT_NUMERIC
    if isinstance(exc, (ValueError, TelecomError, OSError)):
        return EXIT_INPUT
    return EXIT_OTHER


def build_parser():
    p = argparse.ArgumentParser(prog="telecom-lde", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        e = sub.add_parser(name, help=f"run the {name} experiment")
        e.add_argument("--config", help="TOML config file (defaults are built in)")
        e.add_argument("--seed", type=int)
        e.add_argument("--replicates", type=int)
        e.add_argument("--threads", type=int, help="worker threads; 0 uses all available")
        e.add_argument("--out", help="output directory")
    pd = sub.add_parser("plot-data", help="long-form CSV from a results directory or results.csv")
    pd.add_argument("results")
    pd.add_argument("--out", help="file to write (stdout if omitted)")
    return p


def _run_experiment(args):
    from .experiments import run, write_error, write_outputs

    out = args.out
    try:
        cfg = load_config(args.config, args.command) if args.config else default_config(args.command)
        cfg = cfg.with_overrides(seed=args.seed, replicates=args.replicates, threads=args.threads, out=args.out)
        out = cfg.out
        result = run(cfg)
    except Exception as exc:  # reported as a machine-readable record
        code = exit_code_for(exc)
        rec = write_error(out or "results", exc, code)
        print(f"telecom-lde: {rec['error']}: {rec['message']}", file=sys.stderr)
        return code
    write_outputs(result, cfg.out)
    if not result.ok:
        exc = ArithmeticError(f"failed checks: {', '.join(result.failures)}")
        write_error(cfg.out, exc, EXIT_NUMERIC)
        print(f"telecom-lde: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for r in result.rows:
        print(f"{r['method']:>28s}  t={r['t']:<10.6g} rho={r['rho']:<10.6g} value={r['p_hat']:.6g} "
              f"[{r['ci_low']:.6g}, {r['ci_high']:.6g}]  theory={r['theory']:.6g}  ratio={r['ratio']:.4f}")
    print(f"wrote {cfg.out}/results.csv, summary.json, timing.json")
    return EXIT_OK


def _plot_data(args):
    from .experiments import emit_plot_data

    try:
        text = emit_plot_data(args.results, args.out)
    except Exception as exc:
        print(f"telecom-lde: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    if args.out is None:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        # numba falls back to another threading layer when the system TBB is old
        warnings.filterwarnings("ignore", message="The TBB threading layer")
        if args.command == "plot-data":
            return _plot_data(args)
        return _run_experiment(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
