"""RA-mean location estimator and the entrywise robust second-moment matrix."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import CalibrationError, InvalidArgumentError, ShapeError

APPLICABILITY_LIMIT = 1.0 / 8.0
V_FLOOR = 1e-12


@dataclass(frozen=True)
class RaMeanConfig:
    """``alpha=None`` selects ``sqrt(log(1/delta) / (n v^2))`` from the sample size.

    ``root_tol=None`` uses ``1e-10 * (1 + range(samples))``.
    """

    alpha: Optional[float] = None
    delta: float = 0.05
    v: float = 1.0
    root_tol: Optional[float] = None

    def __post_init__(self):
        if self.alpha is not None and not (math.isfinite(self.alpha) and self.alpha > 0):
            raise InvalidArgumentError(f"alpha must be positive, got {self.alpha!r}")
        if self.alpha is None:
            _check_delta(self.delta)
            if not (math.isfinite(self.v) and self.v > 0):
                raise InvalidArgumentError(f"v must be positive, got {self.v!r}")
        if self.root_tol is not None and not self.root_tol > 0:
            raise InvalidArgumentError(f"root_tol must be positive, got {self.root_tol!r}")


@dataclass(frozen=True)
class RobustCovariance:
    sigma_hat: np.ndarray
    delta_used: float
    v_used: float
    v_pairs: np.ndarray


def _check_delta(delta):
    if not 0.0 < delta < 1.0:
        raise InvalidArgumentError(f"delta must lie in (0, 1), got {delta!r}")


def choose_alpha(n, delta, v) -> float:
    """``alpha = sqrt(log(1/delta) / (n v^2))``."""
    _check_delta(delta)
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    if not v > 0:
        raise InvalidArgumentError(f"v must be positive, got {v!r}")
    return math.sqrt(math.log(1.0 / delta) / (n * v * v))


def is_applicable(n, delta) -> bool:
    """Whether ``log(1/delta) / n <= 1/8``, the sample-size condition of the bound."""
    _check_delta(delta)
    return math.log(1.0 / delta) / n <= APPLICABILITY_LIMIT


def min_sample_size(delta) -> int:
    _check_delta(delta)
    return math.ceil(math.log(1.0 / delta) / APPLICABILITY_LIMIT - 1e-12)


def concentration_radius(n, delta, v) -> float:
    """Deviation ``4 v sqrt(log(1/delta) / n)`` exceeded with probability at most ``2 delta``."""
    _check_delta(delta)
    return 4.0 * v * math.sqrt(math.log(1.0 / delta) / n)


def influence_mean(theta, samples, alpha):
    """``(1/(alpha n)) * sum(psi(alpha (y_i - theta)))``; non-increasing in ``theta``."""
    return float(np.mean(np.clip(alpha * (samples - theta), -1.0, 1.0))) / alpha


def _bisect(pred, lo, hi, tol):
    # invariant: pred(lo) is True, pred(hi) is False
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo, hi


def ra_mean(samples, cfg: RaMeanConfig = RaMeanConfig()) -> float:
    """Root of ``sum(psi(alpha (y_i - theta))) = 0`` by bisection.

    When the root set is an interval, the midpoint of the interval is
    returned.
    """
    y = np.asarray(samples, dtype=float).ravel()
    if y.size == 0:
        raise InvalidArgumentError("ra_mean needs at least one sample")
    if not np.all(np.isfinite(y)):
        raise InvalidArgumentError("samples must be finite")
    alpha = cfg.alpha if cfg.alpha is not None else choose_alpha(y.size, cfg.delta, cfg.v)
    lo_s, hi_s = float(y.min()), float(y.max())
    if lo_s == hi_s:
        return lo_s
    tol = cfg.root_tol if cfg.root_tol is not None else 1e-10 * (1.0 + (hi_s - lo_s))
    lo, hi = lo_s - 1.0 / alpha, hi_s + 1.0 / alpha

    # left end of the root set: sup{theta : r(theta) > 0}
    left, _ = _bisect(lambda t: influence_mean(t, y, alpha) > 0.0, lo, hi, tol)
    # right end: inf{theta : r(theta) < 0}
    _, right = _bisect(lambda t: not influence_mean(t, y, alpha) < 0.0, lo, hi, tol)
    return min(max(0.5 * (left + right), lo_s), hi_s)


def robust_covariance(X, delta: Optional[float] = None, v: Optional[float] = None) -> RobustCovariance:
    """Entrywise RA-mean estimate of the second-moment matrix ``E[X_i X_j]``.

    ``delta=None`` uses ``p**-3`` (``0.05`` when ``p == 1``); ``v=None``
    uses the sample standard deviation of each product series, floored at
    ``1e-12``. Means are not subtracted.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ShapeError("X must be a 2-d array")
    n, p = X.shape
    if n < 2:
        raise InvalidArgumentError(f"need at least 2 observations, got {n}")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError("X contains non-finite values")
    if delta is None:
        delta = float(p) ** -3 if p > 1 else 0.05
    _check_delta(delta)
    if not is_applicable(n, delta):
        need = min_sample_size(delta)
        raise CalibrationError(
            f"log(1/delta)/n = {math.log(1 / delta) / n:.4g} exceeds 1/8; "
            f"increase n to at least {need} or increase delta", min_n=need)

    sigma = np.empty((p, p))
    v_pairs = np.empty((p, p))
    for i in range(p):
        for j in range(i, p):
            prod = X[:, i] * X[:, j]
            vij = max(float(np.std(prod, ddof=1)), V_FLOOR) if v is None else float(v)
            alpha = choose_alpha(n, delta, vij)
            est = ra_mean(prod, RaMeanConfig(alpha=alpha))
            sigma[i, j] = sigma[j, i] = est
            v_pairs[i, j] = v_pairs[j, i] = vij
    v_used = float(v) if v is not None else float(v_pairs.max())
    return RobustCovariance(sigma, float(delta), v_used, v_pairs)
