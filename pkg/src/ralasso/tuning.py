"""Selection of the penalty and robustification parameters.

``tune_grid`` scores each grid point by the mean estimation error over
simulated validation sets (needs the true coefficients). ``tune_cv`` is the
real-data counterpart and scores by K-fold prediction error.
"""

from __future__ import annotations

import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError
from .loss import empirical_gradient
from .optimizer import FitConfig
from .regression import Dataset, fit_method_path, fold_indices, method_loss

Pair = tuple  # (lam, alpha); alpha is None for methods without one


@dataclass(frozen=True)
class TuneResult:
    lam: float
    alpha: Optional[float]
    scores: dict  # (lam, alpha) -> mean validation error


def _groups(grid):
    """Group grid pairs by alpha, each with its penalties in decreasing order."""
    if len(grid) == 0:
        raise InvalidArgumentError("tuning grid is empty")
    by_alpha = defaultdict(set)
    for lam, alpha in grid:
        if not (math.isfinite(lam) and lam >= 0):
            raise InvalidArgumentError(f"grid penalty must be >= 0, got {lam!r}")
        by_alpha[alpha].add(float(lam))
    keys = sorted(by_alpha, key=lambda a: (a is not None, a or 0.0))
    return [(a, sorted(by_alpha[a], reverse=True)) for a in keys]


def _argmin(scores):
    # ties: smaller lambda, then smaller alpha
    return min(scores, key=lambda k: (scores[k], k[0], -math.inf if k[1] is None else k[1]))


def lambda_max(method, data: Dataset, alpha=None) -> float:
    """Smallest penalty whose solution is exactly zero: ``||grad L(0)||_inf``."""
    spec = method_loss(method, alpha, data.y)
    return float(np.max(np.abs(empirical_gradient(spec, data.X, data.y, np.zeros(data.p)))))


def path_errors(method, data: Dataset, groups, cfg: FitConfig, score, lad="smoothed"):
    """Run one penalty path per alpha group; return ``score(beta)`` per grid point."""
    out = {}
    for alpha, lams in groups:
        for lam, res in zip(lams, fit_method_path(method, data, lams, alpha, cfg, lad)):
            out[(lam, alpha)] = score(res.beta)
    return out


def _validation_task(args):
    method, make_dataset, index, beta_star, groups, cfg, lad = args
    data = make_dataset(index)
    return path_errors(method, data, groups, cfg,
                       lambda b: math.sqrt(math.fsum((b - beta_star) ** 2)), lad)


def _map(fn, tasks, workers):
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _average(results):
    keys = results[0].keys()
    return {k: math.fsum(r[k] for r in results) / len(results) for k in keys}


def tune_grid(method, make_dataset: Callable[[int], Dataset], beta_star, grid: Sequence[Pair],
              n_validation: int, cfg: Optional[FitConfig] = None, workers=1, lad="smoothed") -> TuneResult:
    """Pick the grid point minimizing the mean L2 error over validation datasets.

    ``make_dataset(i)`` returns the i-th validation dataset; it must be
    picklable when ``workers > 1``.
    """
    groups = _groups(grid)
    if n_validation < 1:
        raise InvalidArgumentError("n_validation must be >= 1")
    cfg = cfg or FitConfig()
    beta_star = np.asarray(beta_star, dtype=float)
    tasks = [(method, make_dataset, i, beta_star, groups, cfg, lad) for i in range(n_validation)]
    scores = _average(_map(_validation_task, tasks, workers))
    lam, alpha = _argmin(scores)
    return TuneResult(lam, alpha, scores)


def _cv_task(args):
    method, data, train, test, groups, cfg, loss, lad = args
    Xt, yt = data.X[test], data.y[test]

    def score(beta):
        r = yt - Xt @ beta
        vals = np.abs(r) if loss == "absolute" else r * r
        return math.fsum(vals) / r.size

    return path_errors(method, data.subset(train), groups, cfg, score, lad)


def tune_cv(data: Dataset, grid: Sequence[Pair], K: int = 5, loss="squared", method="ra-lasso",
            cfg: Optional[FitConfig] = None, seed=0, workers=1, folds=None, lad="smoothed") -> TuneResult:
    """Pick the grid point minimizing K-fold cross-validated prediction error."""
    if loss not in ("squared", "absolute"):
        raise InvalidArgumentError(f"loss must be 'squared' or 'absolute', got {loss!r}")
    groups = _groups(grid)
    cfg = cfg or FitConfig()
    if folds is None:
        folds = fold_indices(data.n, K, seed)
    rows = np.arange(data.n)
    tasks = [(method, data, np.setdiff1d(rows, f, assume_unique=True), f, groups, cfg, loss, lad)
             for f in folds]
    scores = _average(_map(_cv_task, tasks, workers))
    lam, alpha = _argmin(scores)
    return TuneResult(lam, alpha, scores)
