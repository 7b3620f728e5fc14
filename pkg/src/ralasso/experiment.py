"""Scenario execution and report serialization.

A run tunes every penalized method on validation datasets drawn from the
scenario, then fits each method on ``replications`` fresh datasets and
reports mean metrics plus relative gains of RA-Lasso over its competitors.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateGainError, InvalidArgumentError, RaLassoError
from .optimizer import FitConfig
from .regression import fit_method_path, fit_oracle
from .simulation import (
    ErrorLaw, Grid, Metrics, Model, Scenario, SolverSettings, compute_metrics, default_beta_star,
    generate, relative_gain,
)
from .tuning import lambda_max, tune_grid

DEFAULT_METHODS = ("lasso", "r-lasso", "ra-lasso", "oracle")
ALL_METHODS = ("lasso", "r-lasso", "ra-lasso", "catoni-lasso", "oracle")
LABELS = {
    "lasso": "Lasso", "r-lasso": "R-Lasso", "ra-lasso": "RA-Lasso",
    "catoni-lasso": "Catoni-Lasso", "oracle": "Oracle",
}
METRIC_LABELS = (("l2", "L2 loss"), ("l1", "L1 loss"), ("fp", "FP"), ("fn", "FN"))
GAIN_KEYS = (("RG_A,L", "lasso"), ("RG_A,R", "r-lasso"))


class ScenarioError(InvalidArgumentError):
    pass


class ReplicationError(RaLassoError, RuntimeError):
    pass


@dataclass
class MetricsReport:
    scenario: Scenario
    methods: tuple
    tuning: dict          # method -> {"lambda": float, "alpha": float | None}
    lambda_grids: dict    # method -> {alpha: [penalties]}
    means: dict           # method -> Metrics of per-replication means
    gains: dict           # "RG_A,L" -> {"l2": float | None, "l1": float | None}
    per_replication: dict  # method -> list[Metrics]


def _uses_alpha(method):
    return method in ("ra-lasso", "catoni-lasso")


def _solver_cfg(scenario):
    return FitConfig(tol=scenario.solver.tol, max_iters=scenario.solver.max_iters)


def lambda_grid(scenario: Scenario, method, alpha=None, validation=None) -> list:
    """Penalties searched for one (method, alpha), in decreasing order."""
    g = scenario.grid
    if g.lambda_scale == "absolute":
        scale = 1.0
    elif g.lambda_scale == "rate":
        scale = math.sqrt(math.log(scenario.p) / scenario.n) if scenario.p > 1 else 1.0 / math.sqrt(scenario.n)
    else:
        if validation is None:
            validation = [generate(scenario, i, "validation") for i in range(scenario.n_validation)]
        scale = float(np.median([lambda_max(method, d, alpha) for d in validation]))
    return sorted({f * scale for f in g.lambda_factors}, reverse=True)


def build_grids(scenario: Scenario, methods) -> dict:
    validation = None
    if scenario.grid.lambda_scale == "lambda_max":
        validation = [generate(scenario, i, "validation") for i in range(scenario.n_validation)]
    grids = {}
    for m in methods:
        if m == "oracle":
            continue
        alphas = scenario.grid.alphas if _uses_alpha(m) else (None,)
        grids[m] = {a: lambda_grid(scenario, m, a, validation) for a in alphas}
    return grids


def _replicate(args):
    scenario, index, plan = args
    data = generate(scenario, index, "replication")
    cfg = _solver_cfg(scenario)
    out = {}
    for method, (lam, alpha, lams) in plan.items():
        if method == "oracle":
            beta = fit_oracle(data, scenario.support)
        else:
            path = [x for x in lams if x >= lam]
            beta = fit_method_path(method, data, path, alpha, cfg, scenario.solver.lad)[-1].beta
        out[method] = compute_metrics(beta, scenario.beta_star)
    return out


def _safe_replicate(args):
    try:
        return _replicate(args)
    except Exception as exc:  # noqa: BLE001 - reraised with the failing seed
        scenario, index, _ = args
        raise ReplicationError(
            f"replication {index} (seed {scenario.seed}) failed: {exc}") from exc


def _mean_metrics(rows: Sequence[Metrics]) -> Metrics:
    k = len(rows)
    return Metrics(
        l2=math.fsum(r.l2 for r in rows) / k,
        l1=math.fsum(r.l1 for r in rows) / k,
        fp=math.fsum(r.fp for r in rows) / k,
        fn=math.fsum(r.fn for r in rows) / k,
    )


def _gain(means, competitor):
    if "ra-lasso" not in means or "oracle" not in means or competitor not in means:
        return None
    out = {}
    for key in ("l2", "l1"):
        try:
            out[key] = relative_gain(getattr(means[competitor], key), getattr(means["ra-lasso"], key),
                                     getattr(means["oracle"], key))
        except DegenerateGainError:
            out[key] = None
    return out


def run_scenario(scenario: Scenario, methods: Sequence[str] = DEFAULT_METHODS, workers=1) -> MetricsReport:
    """Tune, replicate and aggregate one scenario.

    Results depend only on the scenario (including its seed), not on
    ``workers``.
    """
    methods = tuple(methods)
    for m in methods:
        if m not in ALL_METHODS:
            raise InvalidArgumentError(f"unknown method {m!r}; expected one of {ALL_METHODS}")
    cfg = _solver_cfg(scenario)
    grids = build_grids(scenario, methods)
    make_validation = partial(generate, scenario, purpose="validation")

    tuning, plan = {}, {}
    for m in methods:
        if m == "oracle":
            plan[m] = (None, None, None)
            continue
        pairs = [(lam, a) for a, lams in grids[m].items() for lam in lams]
        res = tune_grid(m, make_validation, scenario.beta_star, pairs, scenario.n_validation, cfg, workers,
                        scenario.solver.lad)
        tuning[m] = {"lambda": res.lam, "alpha": res.alpha}
        plan[m] = (res.lam, res.alpha, grids[m][res.alpha])

    tasks = [(scenario, i, plan) for i in range(scenario.replications)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_safe_replicate, tasks))
    else:
        rows = [_safe_replicate(t) for t in tasks]

    per_rep = {m: [r[m] for r in rows] for m in methods}
    means = {m: _mean_metrics(per_rep[m]) for m in methods}
    gains = {}
    for key, competitor in GAIN_KEYS:
        g = _gain(means, competitor)
        if g is not None:
            gains[key] = g
    return MetricsReport(scenario, methods, tuning, grids, means, gains, per_rep)


# --- scenario files -------------------------------------------------------

def _field(d, name, conv, default=None, required=False):
    if name not in d:
        if required:
            raise ScenarioError(f"field '{name}': missing")
        return default
    try:
        return conv(d[name])
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"field '{name}': {exc}") from None


def _pos_int(x):
    if isinstance(x, bool) or not isinstance(x, int) or x < 1:
        raise ValueError(f"must be a positive integer, got {x!r}")
    return x


def _int(x):
    if isinstance(x, bool) or not isinstance(x, int):
        raise ValueError(f"must be an integer, got {x!r}")
    return x


def _float_list(x):
    if not isinstance(x, list) or not x:
        raise ValueError("must be a non-empty list of numbers")
    out = []
    for v in x:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ValueError(f"must contain finite numbers, got {v!r}")
        out.append(float(v))
    return out


def _enum(cls):
    def conv(x):
        try:
            return cls(x)
        except ValueError:
            raise ValueError(f"must be one of {[e.value for e in cls]}, got {x!r}") from None
    return conv


def scenario_from_dict(d: dict) -> Scenario:
    """Build a scenario from its JSON form, reporting the offending field on error."""
    if not isinstance(d, dict):
        raise ScenarioError("scenario must be a JSON object")
    known = {"model", "error", "n", "p", "beta_star", "beta_star_spec", "replications", "seed",
             "grid", "n_validation", "solver", "methods"}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ScenarioError(f"field '{unknown[0]}': unknown field")
    model = _field(d, "model", _enum(Model), Model.HOMOSCEDASTIC)
    error = _field(d, "error", _enum(ErrorLaw), required=True)
    n = _field(d, "n", _pos_int, 100)
    p = _field(d, "p", _pos_int, 400)
    if "beta_star" in d and "beta_star_spec" in d:
        raise ScenarioError("field 'beta_star': give either beta_star or beta_star_spec, not both")
    beta = None
    if "beta_star" in d:
        beta = np.asarray(_field(d, "beta_star", _float_list))
        if beta.size != p:
            raise ScenarioError(f"field 'beta_star': expected {p} entries, got {beta.size}")
    elif "beta_star_spec" in d:
        spec = d["beta_star_spec"]
        if not isinstance(spec, dict):
            raise ScenarioError("field 'beta_star_spec': must be an object {s, value}")
        s = _field(spec, "s", _int, 20)
        if not 0 <= s <= p:
            raise ScenarioError(f"field 'beta_star_spec.s': must lie in [0, {p}], got {s}")
        value = _field(spec, "value", float, 3.0)
        beta = default_beta_star(p, s, value)
    grid = Grid()
    if "grid" in d:
        g = d["grid"]
        if not isinstance(g, dict):
            raise ScenarioError("field 'grid': must be an object")
        alphas = _field(g, "alphas", _float_list, list(grid.alphas))
        if "lambdas" in g:
            grid_kw = dict(lambda_factors=_field(g, "lambdas", _float_list), lambda_scale="absolute")
        else:
            grid_kw = dict(lambda_factors=_field(g, "lambda_factors", _float_list, list(grid.lambda_factors)),
                           lambda_scale=_field(g, "lambda_scale", str, "rate"))
        try:
            grid = Grid(alphas=tuple(alphas), **grid_kw)
        except InvalidArgumentError as exc:
            raise ScenarioError(str(exc)) from None
    solver = SolverSettings()
    if "solver" in d:
        s = d["solver"]
        if not isinstance(s, dict):
            raise ScenarioError("field 'solver': must be an object")
        try:
            solver = SolverSettings(tol=_field(s, "tol", float, solver.tol),
                                    max_iters=_field(s, "max_iters", _pos_int, solver.max_iters),
                                    lad=_field(s, "lad", str, solver.lad))
        except ScenarioError:
            raise
        except InvalidArgumentError as exc:
            raise ScenarioError(f"field '{str(exc).split(' ')[0]}': {exc}") from None
    try:
        return Scenario(
            model=model, error=error, n=n, p=p, beta_star=beta,
            replications=_field(d, "replications", _pos_int, 100),
            seed=_field(d, "seed", _int, 0),
            grid=grid,
            n_validation=_field(d, "n_validation", _pos_int, 100),
            solver=solver,
        )
    except ScenarioError:
        raise
    except InvalidArgumentError as exc:
        raise ScenarioError(str(exc)) from None


def scenario_methods(d: dict) -> Optional[tuple]:
    if "methods" not in d:
        return None
    ms = d["methods"]
    if not isinstance(ms, list) or not all(isinstance(m, str) for m in ms):
        raise ScenarioError("field 'methods': must be a list of method names")
    bad = [m for m in ms if m not in ALL_METHODS]
    if bad:
        raise ScenarioError(f"field 'methods': unknown method {bad[0]!r}")
    return tuple(ms)


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "model": s.model.value,
        "error": s.error.value,
        "n": s.n,
        "p": s.p,
        "beta_star": [float(b) for b in s.beta_star],
        "replications": s.replications,
        "seed": s.seed,
        "grid": {
            "lambda_factors": list(s.grid.lambda_factors),
            "lambda_scale": s.grid.lambda_scale,
            "alphas": list(s.grid.alphas),
        },
        "n_validation": s.n_validation,
        "solver": {"tol": s.solver.tol, "max_iters": s.solver.max_iters, "lad": s.solver.lad},
    }


# --- reports --------------------------------------------------------------

def report_table(report: MetricsReport) -> dict:
    """Nested ``{row: {column: value}}`` mirroring the published table layout."""
    table = {}
    for m in report.methods:
        mm = report.means[m]
        table[LABELS[m]] = {label: getattr(mm, key) for key, label in METRIC_LABELS}
    for key, _ in GAIN_KEYS:
        if key in report.gains:
            g = report.gains[key]
            table[key] = {"L2 loss": g["l2"], "L1 loss": g["l1"]}
    return table


def report_to_dict(report: MetricsReport, provenance: Optional[dict] = None) -> dict:
    return {
        "provenance": provenance or {},
        "scenario": scenario_to_dict(report.scenario),
        "tuning": {LABELS[m]: v for m, v in report.tuning.items()},
        "lambda_grids": {
            LABELS[m]: [{"alpha": a, "lambdas": lams} for a, lams in g.items()]
            for m, g in report.lambda_grids.items()
        },
        "table": report_table(report),
    }


def _fmt(x):
    if x is None:
        return "NA"
    return repr(float(x))


def report_to_csv(report: MetricsReport, provenance: Optional[dict] = None) -> str:
    """One row per (row label, metric); provenance as leading ``#`` comment lines."""
    buf = io.StringIO()
    for k, v in (provenance or {}).items():
        buf.write(f"# {k}: {json.dumps(v, sort_keys=True) if isinstance(v, (dict, list)) else v}\n")
    for m, t in report.tuning.items():
        buf.write(f"# tuning {LABELS[m]}: lambda={_fmt(t['lambda'])} alpha={_fmt(t['alpha'])}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "metric", "value"])
    for row, cols in report_table(report).items():
        for metric, value in cols.items():
            w.writerow([row, metric, _fmt(value)])
    return buf.getvalue()
