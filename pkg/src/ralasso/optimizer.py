"""Composite gradient descent for L1-penalized smooth losses.

Each iteration minimizes the local quadratic approximation of the loss plus
the L1 penalty over the ball ``||beta||_1 <= rho``. The minimizer is a
soft-threshold of the gradient step followed by a Euclidean projection onto
the L1 ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import _kernels
from .errors import DegenerateDesignError, DivergenceError, InvalidArgumentError, ShapeError
from .loss import LossKind, LossSpec, _value

GAMMA_MARGIN = 0.01

_KIND_CODES = {
    LossKind.SQUARE: _kernels.SQUARE,
    LossKind.RA_QUADRATIC: _kernels.HUBER,
    LossKind.CATONI: _kernels.CATONI,
    LossKind.SMOOTHED_LAD: _kernels.SMOOTHED_LAD,
}


@dataclass(frozen=True)
class FitConfig:
    """Solver hyperparameters.

    ``gamma_u=None`` means the curvature constant is resolved from the
    design with :func:`estimate_gamma_u`.
    """

    lam: float = 0.0
    rho: float = 1e6
    gamma_u: Optional[float] = None
    max_iters: int = 10_000
    tol: float = 1e-10
    beta0: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise InvalidArgumentError(f"lambda must be >= 0, got {self.lam!r}")
        if not self.rho > 0:
            raise InvalidArgumentError(f"rho must be > 0, got {self.rho!r}")
        if not self.tol > 0:
            raise InvalidArgumentError(f"tol must be > 0, got {self.tol!r}")
        if int(self.max_iters) < 1:
            raise InvalidArgumentError(f"max_iters must be >= 1, got {self.max_iters!r}")
        if self.gamma_u is not None and not (math.isfinite(self.gamma_u) and self.gamma_u > 0):
            raise InvalidArgumentError(f"gamma_u must be positive, got {self.gamma_u!r}")


@dataclass
class FitResult:
    beta: np.ndarray
    objective_trace: np.ndarray
    iterations: int
    converged: bool
    gamma_u: float = field(default=float("nan"))

    @property
    def objective(self):
        return float(self.objective_trace[-1])


def soft_threshold(v, tau):
    """Componentwise ``sign(v) * max(|v| - tau, 0)``."""
    if not tau >= 0:
        raise InvalidArgumentError(f"threshold must be >= 0, got {tau!r}")
    v = np.asarray(v, dtype=float)
    if tau == 0:
        return v.copy()
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def l1_ball_threshold(v, rho):
    """Soft-threshold level that maps ``v`` onto the sphere ``||.||_1 = rho``.

    Assumes ``||v||_1 > rho``. Sorts ``|v|`` in descending order, finds the
    largest ``J`` with ``b_J > (sum_{r<=J} b_r - rho) / J`` and returns
    ``(sum_{r<=J} b_r - rho) / J``.
    """
    b = np.sort(np.abs(v), kind="stable")[::-1]
    cums = np.cumsum(b)
    ranks = np.arange(1, b.size + 1)
    theta = (cums - rho) / ranks
    J = int(np.nonzero(b - theta > 0)[0][-1])
    return float(theta[J])


def project_l1_ball(v, rho):
    """Euclidean projection of ``v`` onto ``{beta : ||beta||_1 <= rho}``."""
    if not rho > 0:
        raise InvalidArgumentError(f"rho must be > 0, got {rho!r}")
    v = np.asarray(v, dtype=float)
    if np.sum(np.abs(v)) <= rho:
        return v.copy()
    return soft_threshold(v, l1_ball_threshold(v, rho))


def top_eigenvalue(X, tol=1e-6, max_iter=10_000):
    """Largest eigenvalue of ``X.T @ X / n`` by power iteration.

    Iterates on whichever of the two Gram matrices is smaller; both share
    their nonzero spectrum. The start vector is the normalized ones vector.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    G = (X.T @ X) / n if p <= n else (X @ X.T) / n
    v = np.ones(G.shape[0]) / math.sqrt(G.shape[0])
    lam = float(v @ G @ v)
    for _ in range(max_iter):
        w = G @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v = w / norm
        new = float(v @ G @ v)
        if abs(new - lam) <= tol * abs(new):
            return new
        lam = new
    return lam


def estimate_gamma_u(X, curvature=2.0, margin=GAMMA_MARGIN, tol=1e-6):
    """Curvature constant ``curvature * lambda_max(X.T X / n) * (1 + margin)``.

    With ``curvature`` bounding the second derivative of the loss, this
    bounds the Lipschitz constant of the empirical gradient.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.size == 0:
        raise ShapeError("X must be a non-empty 2-d array")
    if not np.any(X):
        raise DegenerateDesignError("design matrix is identically zero")
    return curvature * top_eigenvalue(X, tol=tol) * (1.0 + margin)


def lqa_step(beta_t, grad, cfg: FitConfig):
    """One composite-gradient update from ``beta_t``.

    Soft-thresholds ``beta_t - grad / gamma_u`` at ``lam / gamma_u`` and
    projects the result onto the L1 ball of radius ``rho``.
    """
    if cfg.gamma_u is None:
        raise InvalidArgumentError("lqa_step needs a resolved gamma_u")
    beta_t = np.asarray(beta_t, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if beta_t.shape != grad.shape:
        raise ShapeError(f"beta {beta_t.shape} and gradient {grad.shape} differ in shape")
    g = cfg.gamma_u
    check = soft_threshold(beta_t - grad / g, cfg.lam / g)
    return project_l1_ball(check, cfg.rho)


def objective(spec: LossSpec, X, y, beta, lam) -> float:
    """Penalized objective ``mean(loss(y - X beta)) + lam * ||beta||_1``."""
    r = np.asarray(y, dtype=float) - np.asarray(X, dtype=float) @ np.asarray(beta, dtype=float)
    return float(np.mean(_value(spec, r))) + lam * float(np.sum(np.abs(beta)))


def composite_gradient_descent(spec: LossSpec, X, y, cfg: FitConfig) -> FitResult:
    """Minimize ``mean(loss(y - X beta)) + lam * ||beta||_1`` over the L1 ball.

    Stops once the objective decreases by less than ``cfg.tol`` in one step
    (``converged=True``) or after ``cfg.max_iters`` steps. The returned
    trace starts with the objective at the initial point.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ShapeError(f"inconsistent shapes X{X.shape}, y{y.shape}")
    p = X.shape[1]
    if cfg.gamma_u is None:
        cfg = replace(cfg, gamma_u=estimate_gamma_u(X, curvature=spec.curvature))
    if cfg.beta0 is None:
        beta = np.zeros(p)
    else:
        beta = np.array(cfg.beta0, dtype=float)
        if beta.shape != (p,):
            raise ShapeError(f"beta0 must have shape ({p},), got {beta.shape}")
        beta = project_l1_ball(beta, cfg.rho)

    g, lam = cfg.gamma_u, cfg.lam
    start = objective(spec, X, y, beta, lam)
    if not math.isfinite(start):
        raise DivergenceError("objective is not finite at the initial point")
    trace = np.empty(int(cfg.max_iters) + 1)
    trace[0] = start
    its, converged, finite = _kernels.cgd_loop(
        np.ascontiguousarray(X), np.ascontiguousarray(X.T), np.ascontiguousarray(y), beta,
        _KIND_CODES[spec.kind], float(spec.alpha), float(g), float(lam), float(cfg.rho),
        float(cfg.tol), int(cfg.max_iters), trace)
    if not finite:
        raise DivergenceError(
            f"objective became non-finite at iteration {its}; gamma_u={g} is too small")
    return FitResult(beta=beta, objective_trace=trace[:its + 1].copy(), iterations=int(its),
                     converged=bool(converged), gamma_u=g)
