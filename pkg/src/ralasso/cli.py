"""Command-line interface.

Every command reads CSV or JSON input, writes a self-describing output
(a ``provenance`` object in JSON, ``#`` comment lines in CSV) and exits with
0 on success, 2 on bad input, 3 on a calibration failure and 4 on a
numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from functools import partial

import numpy as np

from . import __version__
from .errors import CalibrationError, InvalidArgumentError, RaLassoError
from .experiment import (
    ALL_METHODS, DEFAULT_METHODS, ReplicationError, build_grids, report_to_csv, report_to_dict,
    run_scenario, scenario_from_dict, scenario_methods,
)
from .optimizer import FitConfig
from .regression import METHODS, Dataset, estimate_sigma2_cv, fit_method, predict
from .rng import RNG_NAME
from .robust_mean import (
    RaMeanConfig, choose_alpha, concentration_radius, is_applicable, min_sample_size, ra_mean,
    robust_covariance,
)
from .simulation import generate
from .tuning import tune_cv, tune_grid

EXIT_OK, EXIT_INPUT, EXIT_CALIBRATION, EXIT_NUMERIC = 0, 2, 3, 4
SEED_ENV = "RML_SEED"
# flags that never influence results; kept out of provenance so outputs stay byte-identical
_NOT_PROVENANCE = {"command", "output", "workers", "residuals", "json_output", "csv_output", "handler",
                   "seed_given"}


class InputError(RaLassoError, ValueError):
    pass


# --- input ----------------------------------------------------------------

def read_table(path):
    """Parse a headed numeric CSV into ``(names, rows)``; reject ragged or non-finite lines."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: cannot open ({exc.strerror})") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or not any(h.strip() for h in header):
            raise InputError(f"{path}: line 1: missing header row")
        names = [h.strip() for h in header]
        if len(set(names)) != len(names):
            raise InputError(f"{path}: line 1: duplicate column names")
        rows = []
        for record in reader:
            line = reader.line_num
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != len(names):
                raise InputError(f"{path}: line {line}: expected {len(names)} fields, got {len(record)}")
            try:
                vals = [float(c) for c in record]
            except ValueError:
                raise InputError(f"{path}: line {line}: non-numeric field") from None
            if not all(math.isfinite(v) for v in vals):
                raise InputError(f"{path}: line {line}: NaN or infinite value")
            rows.append(vals)
    if not rows:
        raise InputError(f"{path}: no data rows")
    return names, np.asarray(rows, dtype=float)


def read_dataset(path) -> Dataset:
    names, table = read_table(path)
    if "y" not in names:
        raise InputError(f"{path}: line 1: no 'y' column")
    j = names.index("y")
    X = np.delete(table, j, axis=1)
    if X.shape[1] == 0:
        raise InputError(f"{path}: no feature columns besides 'y'")
    return Dataset(X, table[:, j].copy())


def read_features(path, p):
    names, table = read_table(path)
    if "y" in names:
        table = np.delete(table, names.index("y"), axis=1)
    if table.shape[1] != p:
        raise InputError(f"{path}: expected {p} feature columns, got {table.shape[1]}")
    return table


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"{path}: cannot open ({exc.strerror})") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None


# --- output ---------------------------------------------------------------

def provenance(args) -> dict:
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_PROVENANCE and k != "seed"}
    return {"version": __version__, "seed": args.seed, "rng": RNG_NAME, "flags": flags}


def _csv_header(prov):
    lines = [f"# version: {prov['version']}", f"# seed: {prov['seed']}", f"# rng: {prov['rng']}",
             f"# flags: {json.dumps(prov['flags'], sort_keys=True)}"]
    return "\n".join(lines) + "\n"


def write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def dump_json(obj) -> str:
    # json renders floats with repr, the shortest string that round-trips exactly
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _floats(a):
    return [float(x) for x in np.asarray(a).ravel()]


# --- commands -------------------------------------------------------------

def _fit_config(args):
    return FitConfig(rho=args.rho, max_iters=args.max_iters, tol=args.tol)


def _need_alpha(method, alpha):
    if method in ("ra-lasso", "catoni-lasso") and alpha is None:
        raise InputError(f"--alpha is required for {method}")
    return alpha if method in ("ra-lasso", "catoni-lasso") else None


def cmd_fit(args):
    data = read_dataset(args.data)
    alpha = _need_alpha(args.method, args.alpha)
    res = fit_method(args.method, data, args.lam, alpha, _fit_config(args), args.lad)
    if not res.converged:
        print(f"warning: no convergence after {res.iterations} iterations", file=sys.stderr)
    out = {
        "provenance": provenance(args),
        "method": args.method,
        "lambda": args.lam,
        "alpha": alpha,
        "beta": _floats(res.beta),
        "objective_trace": _floats(res.objective_trace),
        "iterations": res.iterations,
        "converged": res.converged,
    }
    write_text(args.output, dump_json(out))
    if args.residuals:
        resid = np.sort(data.y - predict(res.beta, data.X))
        text = _csv_header(provenance(args)) + "residual\n" + "".join(f"{r!r}\n" for r in resid.tolist())
        write_text(args.residuals, text)


def cmd_predict(args):
    fit = read_json(args.beta)
    beta = fit.get("beta") if isinstance(fit, dict) else None
    if not isinstance(beta, list) or not all(isinstance(b, (int, float)) for b in beta):
        raise InputError(f"{args.beta}: field 'beta': expected a list of numbers")
    beta = np.asarray(beta, dtype=float)
    X = read_features(args.data, beta.size)
    yhat = predict(beta, X)
    text = _csv_header(provenance(args)) + "yhat\n" + "".join(f"{v!r}\n" for v in yhat.tolist())
    write_text(args.output, text)


def _one_column(path):
    names, table = read_table(path)
    if table.shape[1] != 1:
        raise InputError(f"{path}: expected one column, got {table.shape[1]}")
    return table[:, 0]


def cmd_mean(args):
    y = _one_column(args.data)
    n = y.size
    if args.alpha is not None:
        alpha = args.alpha
    else:
        alpha = choose_alpha(n, args.delta, args.v)
    if args.strict and not is_applicable(n, args.delta):
        need = min_sample_size(args.delta)
        raise CalibrationError(f"n={n} is below the minimum {need} for delta={args.delta}", min_n=need)
    est = ra_mean(y, RaMeanConfig(alpha=alpha, delta=args.delta, v=args.v))
    out = {
        "provenance": provenance(args),
        "estimate": est,
        "n": n,
        "alpha": alpha,
        "delta": args.delta,
        "v": args.v,
        "radius": concentration_radius(n, args.delta, args.v),
        "applicable": is_applicable(n, args.delta),
        "min_n": min_sample_size(args.delta),
    }
    write_text(args.output, dump_json(out))


def cmd_cov(args):
    names, X = read_table(args.data)
    cov = robust_covariance(X, delta=args.delta, v=args.v)
    n = X.shape[0]
    radii = [[concentration_radius(n, cov.delta_used, v) for v in row] for row in cov.v_pairs]
    out = {
        "provenance": provenance(args),
        "columns": names,
        "sigma_hat": [_floats(r) for r in cov.sigma_hat],
        "delta_used": cov.delta_used,
        "v_used": cov.v_used,
        "v_pairs": [_floats(r) for r in cov.v_pairs],
        "radius": radii,
        "applicable": is_applicable(n, cov.delta_used),
    }
    write_text(args.output, dump_json(out))


def sigma2_fitter(method, lam, alpha, cfg, lad="smoothed"):
    return partial(_fit_beta, method, lam, alpha, cfg, lad)


def _fit_beta(method, lam, alpha, cfg, lad, data):
    return fit_method(method, data, lam, alpha, cfg, lad).beta


def cmd_sigma2(args):
    data = read_dataset(args.data)
    alpha = _need_alpha(args.method, args.alpha)
    fitter = sigma2_fitter(args.method, args.lam, alpha, _fit_config(args), args.lad)
    est = estimate_sigma2_cv(data, args.k, fitter, seed=args.seed, workers=args.workers)
    out = {
        "provenance": provenance(args),
        "sigma2_hat": est.sigma2_hat,
        "folds": est.folds,
        "per_fold": _floats(est.per_fold),
        "method": args.method,
        "lambda": args.lam,
        "alpha": alpha,
    }
    write_text(args.output, dump_json(out))


def _tune_pairs(method, lambdas, alphas):
    if method in ("ra-lasso", "catoni-lasso"):
        return [(lam, a) for a in alphas for lam in lambdas]
    return [(lam, None) for lam in lambdas]


def _scores(scores):
    return [{"lambda": k[0], "alpha": k[1], "score": v}
            for k, v in sorted(scores.items(), key=lambda kv: (kv[0][1] or 0.0, kv[0][0]))]


def cmd_tune(args):
    if args.scenario:
        scenario = scenario_from_dict(read_json(args.scenario))
        if args.method == "oracle":
            raise InputError("the oracle has no tuning parameters")
        grids = build_grids(scenario, [args.method])[args.method]
        pairs = [(lam, a) for a, lams in grids.items() for lam in lams]
        cfg = FitConfig(tol=scenario.solver.tol, max_iters=scenario.solver.max_iters)
        res = tune_grid(args.method, partial(generate, scenario, purpose="validation"),
                        scenario.beta_star, pairs, scenario.n_validation, cfg, args.workers,
                        scenario.solver.lad)
        mode = "validation"
    else:
        if not args.data:
            raise InputError("tune needs a data CSV or --scenario")
        if not args.lambdas:
            raise InputError("--lambdas is required when tuning on data")
        data = read_dataset(args.data)
        pairs = _tune_pairs(args.method, args.lambdas, args.alphas)
        res = tune_cv(data, pairs, K=args.k, loss=args.loss, method=args.method,
                      cfg=_fit_config(args), seed=args.seed, workers=args.workers, lad=args.lad)
        mode = "cross-validation"
    out = {
        "provenance": provenance(args),
        "mode": mode,
        "method": args.method,
        "lambda": res.lam,
        "alpha": res.alpha,
        "scores": _scores(res.scores),
    }
    write_text(args.output, dump_json(out))


def cmd_simulate(args):
    raw = read_json(args.scenario)
    if args.seed_given and isinstance(raw, dict):
        raw = dict(raw, seed=args.seed)
    scenario = scenario_from_dict(raw)
    methods = args.methods or scenario_methods(raw) or DEFAULT_METHODS
    args.seed = scenario.seed
    report = run_scenario(scenario, methods, workers=args.workers)
    prov = provenance(args)
    if args.csv_output is None and args.json_output is None:
        write_text("-", report_to_csv(report, prov))
        return
    if args.csv_output:
        write_text(args.csv_output, report_to_csv(report, prov))
    if args.json_output:
        write_text(args.json_output, dump_json(report_to_dict(report, prov)))


# --- parser ---------------------------------------------------------------

def _positive(kind):
    def conv(text):
        try:
            x = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not (math.isfinite(x) and x > 0):
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return x
    return conv


def _nonneg_float(text):
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (math.isfinite(x) and x >= 0):
        raise argparse.ArgumentTypeError(f"must be >= 0: {text!r}")
    return x


def _float_list(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected finite numbers: {text!r}")
    return vals


def build_parser():
    parser = argparse.ArgumentParser(prog="ralasso", description="Robust sparse regression tools.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, workers=False):
        p.add_argument("-o", "--output", default="-", help="output file (default: stdout)")
        p.add_argument("--seed", type=int, default=None, help=f"RNG seed; {SEED_ENV} overrides it")
        if workers:
            p.add_argument("--workers", type=_positive(int), default=1)

    def solver(p):
        p.add_argument("--rho", type=_positive(float), default=1e6, help="L1-ball radius")
        p.add_argument("--max-iters", type=_positive(int), default=10_000)
        p.add_argument("--tol", type=_positive(float), default=1e-10)
        p.add_argument("--lad", choices=("smoothed", "exact"), default="smoothed",
                       help="R-Lasso solver: smoothed absolute loss or exact linear program")

    def method(p, default="ra-lasso"):
        p.add_argument("--method", choices=METHODS, default=default)
        p.add_argument("--alpha", type=_positive(float), default=None)

    p = sub.add_parser("fit", help="fit a penalized regression")
    p.add_argument("data")
    method(p)
    p.add_argument("--lambda", dest="lam", type=_nonneg_float, required=True)
    p.add_argument("--residuals", default=None, help="also write sorted residuals as CSV")
    solver(p)
    common(p)
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("predict", help="apply fitted coefficients to a design")
    p.add_argument("data")
    p.add_argument("--beta", required=True, help="JSON written by 'fit'")
    common(p)
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("mean", help="RA-mean of a single column")
    p.add_argument("data")
    p.add_argument("--delta", type=_positive(float), default=0.05)
    p.add_argument("--v", type=_positive(float), default=1.0)
    p.add_argument("--alpha", type=_positive(float), default=None)
    p.add_argument("--strict", action="store_true", help="fail when the sample is too small for the bound")
    common(p)
    p.set_defaults(handler=cmd_mean)

    p = sub.add_parser("cov", help="entrywise robust second-moment matrix")
    p.add_argument("data")
    p.add_argument("--delta", type=_positive(float), default=None)
    p.add_argument("--v", type=_positive(float), default=None)
    common(p)
    p.set_defaults(handler=cmd_cov)

    p = sub.add_parser("sigma2", help="cross-validated noise variance")
    p.add_argument("data")
    method(p)
    p.add_argument("--lambda", dest="lam", type=_nonneg_float, required=True)
    p.add_argument("--k", type=_positive(int), default=5)
    solver(p)
    common(p, workers=True)
    p.set_defaults(handler=cmd_sigma2)

    p = sub.add_parser("tune", help="grid search by cross validation or simulated validation sets")
    p.add_argument("data", nargs="?")
    p.add_argument("--scenario", default=None, help="scenario JSON; tune on simulated validation sets")
    p.add_argument("--method", choices=METHODS, default="ra-lasso")
    p.add_argument("--lambdas", type=_float_list, default=None)
    p.add_argument("--alphas", type=_float_list, default=[0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0])
    p.add_argument("--k", type=_positive(int), default=5)
    p.add_argument("--loss", choices=("squared", "absolute"), default="squared")
    solver(p)
    common(p, workers=True)
    p.set_defaults(handler=cmd_tune)

    p = sub.add_parser("simulate", help="run a simulation scenario")
    p.add_argument("scenario")
    p.add_argument("--methods", type=lambda s: [m.strip() for m in s.split(",") if m.strip()], default=None)
    p.add_argument("--csv-output", default=None)
    p.add_argument("--json-output", default=None)
    common(p, workers=True)
    p.set_defaults(handler=cmd_simulate)
    return parser


def _resolve_seed(args):
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            args.seed = int(env)
        except ValueError:
            raise InputError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = 0


def _exit_code(exc):
    while isinstance(exc, ReplicationError) and exc.__cause__ is not None:
        exc = exc.__cause__
    if isinstance(exc, CalibrationError):
        return EXIT_CALIBRATION
    if isinstance(exc, (ValueError, InvalidArgumentError)):
        return EXIT_INPUT
    return EXIT_NUMERIC


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    try:
        _resolve_seed(args)
        if getattr(args, "methods", None):
            bad = [m for m in args.methods if m not in ALL_METHODS]
            if bad:
                raise InputError(f"unknown method {bad[0]!r}")
        args.handler(args)
        return EXIT_OK
    except (RaLassoError, ArithmeticError, ValueError) as exc:
        code = _exit_code(exc)
        msg = str(exc)
        if isinstance(exc, CalibrationError) and exc.min_n is not None and "least" not in msg:
            msg += f" (minimum n: {exc.min_n})"
        print(f"error: {msg}", file=sys.stderr)
        return code


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
