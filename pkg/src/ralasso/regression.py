"""Penalized regression estimators and the cross-validated noise-variance estimate."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg, optimize

from .errors import DivergenceError, InvalidArgumentError, RankDeficiencyError, ShapeError
from .loss import LossSpec
from .optimizer import FitConfig, FitResult, composite_gradient_descent, estimate_gamma_u
from .rng import make_rng

R_LASSO_DELTA = 1e-2
METHODS = ("lasso", "r-lasso", "ra-lasso", "catoni-lasso")
LAD_SOLVERS = ("smoothed", "exact")


@dataclass(frozen=True)
class Dataset:
    """Design matrix ``X`` (rows are observations) and response ``y``."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or y.ndim != 1:
            raise ShapeError("X must be 2-d and y 1-d")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise ShapeError(f"need n >= 1 and p >= 1, got X{X.shape}")
        if X.shape[0] != y.shape[0]:
            raise ShapeError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InvalidArgumentError("dataset contains non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    def subset(self, rows):
        return Dataset(self.X[rows], self.y[rows])


@dataclass(frozen=True)
class VarianceEstimate:
    sigma2_hat: float
    folds: int
    per_fold: np.ndarray


def _fit(spec, data, lam, cfg):
    cfg = replace(cfg or FitConfig(), lam=lam)
    return composite_gradient_descent(spec, data.X, data.y, cfg)


def fit_ra_lasso(data: Dataset, alpha, lam, cfg: Optional[FitConfig] = None) -> FitResult:
    """Penalized RA-quadratic (Huber) regression."""
    return _fit(LossSpec.ra_quadratic(alpha), data, lam, cfg)


def fit_lasso(data: Dataset, lam, cfg: Optional[FitConfig] = None) -> FitResult:
    return _fit(LossSpec.square(), data, lam, cfg)


def r_lasso_delta(y, delta=R_LASSO_DELTA):
    """Smoothing half-width for R-Lasso: ``delta`` in units of the response scale."""
    scale = float(np.std(y))
    return delta * scale if scale > 0 else delta


def fit_r_lasso(data: Dataset, lam, cfg: Optional[FitConfig] = None, delta=R_LASSO_DELTA) -> FitResult:
    """Penalized least absolute deviations, smoothed at half-width ``delta * sd(y)``."""
    return _fit(LossSpec.smoothed_lad(r_lasso_delta(data.y, delta)), data, lam, cfg)


def fit_lad_lasso(data: Dataset, lam, rho=1e6) -> FitResult:
    """Exact L1-penalized least absolute deviations, solved as a linear program.

    Minimizes ``mean(|y - X beta|) + lam * ||beta||_1`` subject to
    ``||beta||_1 <= rho`` with HiGHS. The objective trace holds the values
    at zero and at the solution.
    """
    if not (math.isfinite(lam) and lam >= 0):
        raise InvalidArgumentError(f"lambda must be >= 0, got {lam!r}")
    X, y = data.X, data.y
    n, p = X.shape
    # variables: beta+ (p), beta- (p), u+ (n), u- (n); X (beta+ - beta-) + u+ - u- = y
    c = np.concatenate([np.full(2 * p, float(lam)), np.full(2 * n, 1.0 / n)])
    eye = np.eye(n)
    A_eq = np.hstack([X, -X, eye, -eye])
    A_ub = np.concatenate([np.ones(2 * p), np.zeros(2 * n)])[None, :]
    res = optimize.linprog(c, A_ub=A_ub, b_ub=[rho], A_eq=A_eq, b_eq=y, bounds=(0, None), method="highs")
    if res.status != 0:
        raise DivergenceError(f"LAD linear program failed: {res.message}")
    beta = res.x[:p] - res.x[p:2 * p]
    start = float(np.mean(np.abs(y)))
    final = float(np.mean(np.abs(y - X @ beta))) + lam * float(np.sum(np.abs(beta)))
    return FitResult(beta=beta, objective_trace=np.array([start, min(final, start)]),
                     iterations=int(res.nit), converged=True)


def fit_catoni_lasso(data: Dataset, alpha, lam, cfg: Optional[FitConfig] = None) -> FitResult:
    return _fit(LossSpec.catoni(alpha), data, lam, cfg)


def method_loss(method, alpha=None, y=None, delta=R_LASSO_DELTA) -> LossSpec:
    """Loss used by a named penalized method."""
    if method == "lasso":
        return LossSpec.square()
    if method == "ra-lasso":
        return LossSpec.ra_quadratic(alpha)
    if method == "catoni-lasso":
        return LossSpec.catoni(alpha)
    if method == "r-lasso":
        return LossSpec.smoothed_lad(r_lasso_delta(y, delta) if y is not None else delta)
    raise InvalidArgumentError(f"unknown method {method!r}; expected one of {METHODS}")


def _check_lad(lad):
    if lad not in LAD_SOLVERS:
        raise InvalidArgumentError(f"lad solver must be one of {LAD_SOLVERS}, got {lad!r}")


def fit_method(method, data: Dataset, lam, alpha=None, cfg: Optional[FitConfig] = None,
               lad="smoothed") -> FitResult:
    """Fit a named method. ``lad="exact"`` solves R-Lasso as a linear program."""
    _check_lad(lad)
    if method == "r-lasso" and lad == "exact":
        return fit_lad_lasso(data, lam, (cfg or FitConfig()).rho)
    return _fit(method_loss(method, alpha, data.y), data, lam, cfg)


def fit_method_path(method, data: Dataset, lambdas: Sequence[float], alpha=None,
                    cfg: Optional[FitConfig] = None, lad="smoothed") -> list[FitResult]:
    """Penalty path for a named method; smooth losses are warm-started."""
    _check_lad(lad)
    if method == "r-lasso" and lad == "exact":
        rho = (cfg or FitConfig()).rho
        return [fit_lad_lasso(data, lam, rho) for lam in lambdas]
    return fit_path(method_loss(method, alpha, data.y), data, lambdas, cfg)


def fit_path(spec: LossSpec, data: Dataset, lambdas: Sequence[float],
             cfg: Optional[FitConfig] = None) -> list[FitResult]:
    """Fit a sequence of penalties, warm-starting each fit from the previous one.

    ``lambdas`` is visited in the given order; pass it in decreasing order
    for the usual path behaviour. The curvature constant is resolved once.
    """
    cfg = cfg or FitConfig()
    if cfg.gamma_u is None:
        cfg = replace(cfg, gamma_u=estimate_gamma_u(data.X, curvature=spec.curvature))
    out = []
    beta = cfg.beta0
    for lam in lambdas:
        res = composite_gradient_descent(spec, data.X, data.y, replace(cfg, lam=lam, beta0=beta))
        out.append(res)
        beta = res.beta
    return out


def fit_oracle(data: Dataset, support) -> np.ndarray:
    """Least squares on the columns in ``support``; zeros elsewhere."""
    support = np.asarray(sorted(set(int(j) for j in support)), dtype=int)
    if support.size == 0:
        return np.zeros(data.p)
    if support.min() < 0 or support.max() >= data.p:
        raise InvalidArgumentError("support index out of range")
    if support.size > data.n:
        raise RankDeficiencyError(f"support of size {support.size} exceeds n={data.n}")
    Xs = data.X[:, support]
    gram = Xs.T @ Xs
    try:
        factor = linalg.cho_factor(gram, lower=False, check_finite=False)
    except linalg.LinAlgError as exc:
        raise RankDeficiencyError("restricted Gram matrix is singular") from exc
    # cho_factor accepts near-singular matrices; reject them explicitly
    diag = np.diag(factor[0])
    if diag.min() <= np.sqrt(np.finfo(float).eps) * diag.max():
        raise RankDeficiencyError("restricted Gram matrix is numerically singular")
    beta = np.zeros(data.p)
    beta[support] = linalg.cho_solve(factor, Xs.T @ data.y, check_finite=False)
    return beta


def predict(beta, X) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or beta.ndim != 1 or X.shape[1] != beta.shape[0]:
        raise ShapeError(f"cannot apply beta{beta.shape} to X{X.shape}")
    return X @ beta


def fold_indices(n, K, seed=0, shuffle=True) -> list[np.ndarray]:
    """Split ``range(n)`` into ``K`` contiguous blocks after a seeded shuffle.

    The first ``n % K`` folds get one extra observation.
    """
    if K < 2:
        raise InvalidArgumentError(f"need at least 2 folds, got {K}")
    if K > n:
        raise InvalidArgumentError(f"cannot split {n} observations into {K} folds")
    order = make_rng(seed, "folds").permutation(n) if shuffle else np.arange(n)
    sizes = [n // K + (1 if k < n % K else 0) for k in range(K)]
    bounds = np.cumsum([0] + sizes)
    return [np.sort(order[bounds[k]:bounds[k + 1]]) for k in range(K)]


def estimate_sigma2_cv(data: Dataset, K: int, fitter: Callable[[Dataset], np.ndarray],
                       seed=0, workers=1, folds=None) -> VarianceEstimate:
    """K-fold estimate of the noise variance.

    ``fitter`` maps a training dataset to a coefficient vector. For each
    fold the coefficients are fitted on the complement and the mean squared
    residual on the fold is recorded; the estimate is the mean over folds.
    """
    if folds is None:
        folds = fold_indices(data.n, K, seed)
    all_rows = np.arange(data.n)

    def one(idx):
        train = np.setdiff1d(all_rows, idx, assume_unique=True)
        beta = np.asarray(fitter(data.subset(train)), dtype=float)
        resid = data.y[idx] - data.X[idx] @ beta
        return math.fsum(resid * resid) / idx.size

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_fold = list(pool.map(one, folds))
    else:
        per_fold = [one(idx) for idx in folds]
    per_fold = np.asarray(per_fold)
    # fsum is correctly rounded, so the mean does not depend on fold order
    return VarianceEstimate(math.fsum(per_fold) / len(per_fold), len(folds), per_fold)
