"""Simulation models, error laws and accuracy metrics."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateGainError, InvalidArgumentError, ShapeError
from .regression import Dataset
from .rng import make_rng

ZERO_TOL = 1e-8
DEFAULT_ALPHAS = (0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0)
DEFAULT_LAMBDA_FACTORS = tuple(float(x) for x in np.geomspace(0.01, 3.0, 15))

_WEIBULL_SHAPE = 0.3
_WEIBULL_SCALE = 0.5


class ErrorLaw(str, enum.Enum):
    NORMAL04 = "normal04"
    TWO_T3 = "two-t3"
    MIXN = "mixn"
    LOGNORMAL = "lognormal"
    WEIBULL = "weibull"
    # noiseless law, for testing only
    ZERO = "zero"

    @property
    def centering(self) -> float:
        """Mean of the raw law, subtracted so that every draw has mean zero."""
        if self is ErrorLaw.MIXN:
            return 0.5 * (-1.0) + 0.5 * 8.0
        if self is ErrorLaw.LOGNORMAL:
            return math.exp(1.0 + 1.2 ** 2 / 2.0)
        if self is ErrorLaw.WEIBULL:
            return _WEIBULL_SCALE * math.gamma(1.0 + 1.0 / _WEIBULL_SHAPE)
        return 0.0

    @property
    def variance(self) -> float:
        if self is ErrorLaw.NORMAL04:
            return 4.0
        if self is ErrorLaw.TWO_T3:
            return 4.0 * 3.0
        if self is ErrorLaw.MIXN:
            m = self.centering
            return 0.5 * (4.0 + (-1.0 - m) ** 2) + 0.5 * (1.0 + (8.0 - m) ** 2)
        if self is ErrorLaw.LOGNORMAL:
            s2 = 1.2 ** 2
            return math.exp(2.0 + s2) * (math.exp(s2) - 1.0)
        if self is ErrorLaw.WEIBULL:
            k = _WEIBULL_SHAPE
            return _WEIBULL_SCALE ** 2 * (math.gamma(1 + 2 / k) - math.gamma(1 + 1 / k) ** 2)
        return 0.0


def sample_error(law: ErrorLaw, rng: np.random.Generator, size=None):
    """Centered draw(s) from ``law``."""
    law = ErrorLaw(law)
    if law is ErrorLaw.NORMAL04:
        return 2.0 * rng.standard_normal(size)
    if law is ErrorLaw.TWO_T3:
        return 2.0 * rng.standard_t(3, size)
    if law is ErrorLaw.MIXN:
        first = rng.random(size) < 0.5
        z = rng.standard_normal(size)
        raw = np.where(first, -1.0 + 2.0 * z, 8.0 + z)
        return raw - law.centering
    if law is ErrorLaw.LOGNORMAL:
        return np.exp(1.0 + 1.2 * rng.standard_normal(size)) - law.centering
    if law is ErrorLaw.WEIBULL:
        return _WEIBULL_SCALE * rng.weibull(_WEIBULL_SHAPE, size) - law.centering
    return np.zeros(size) if size is not None else 0.0


class Model(str, enum.Enum):
    HOMOSCEDASTIC = "homoscedastic"
    HETEROSCEDASTIC = "heteroscedastic"


def default_beta_star(p=400, s=20, value=3.0):
    beta = np.zeros(p)
    beta[:min(s, p)] = value
    return beta


def hetero_constant(beta_star) -> float:
    """``c = sqrt(3) * ||beta*||^2``, which gives the noise multiplier unit second moment."""
    return math.sqrt(3.0) * float(np.dot(beta_star, beta_star))


def noise_multiplier(X, beta_star):
    """Per-row factor ``(x_i . beta*)^2 / c`` of the heteroscedastic model."""
    c = hetero_constant(beta_star)
    if c == 0:
        raise InvalidArgumentError("heteroscedastic model needs a nonzero beta_star")
    lin = np.asarray(X) @ beta_star
    return lin * lin / c


@dataclass(frozen=True)
class Grid:
    """Tuning grid.

    ``lambda_scale`` selects how ``lambda_factors`` become penalties:
    ``"rate"`` multiplies by ``sqrt(log p / n)``, ``"lambda_max"`` by the
    median (over validation sets) of the smallest penalty giving the zero
    solution, and ``"absolute"`` uses the factors as-is.
    """

    lambda_factors: tuple = DEFAULT_LAMBDA_FACTORS
    lambda_scale: str = "rate"
    alphas: tuple = DEFAULT_ALPHAS

    def __post_init__(self):
        if self.lambda_scale not in ("rate", "lambda_max", "absolute"):
            raise InvalidArgumentError(f"grid.lambda_scale: unknown scale {self.lambda_scale!r}")
        if len(self.lambda_factors) == 0 or len(self.alphas) == 0:
            raise InvalidArgumentError("grid: lambda and alpha lists must be non-empty")
        if any(not (math.isfinite(x) and x >= 0) for x in self.lambda_factors):
            raise InvalidArgumentError("grid.lambdas: values must be finite and >= 0")
        if any(not (math.isfinite(a) and a > 0) for a in self.alphas):
            raise InvalidArgumentError("grid.alphas: values must be positive")
        object.__setattr__(self, "lambda_factors", tuple(float(x) for x in self.lambda_factors))
        object.__setattr__(self, "alphas", tuple(float(x) for x in self.alphas))


@dataclass(frozen=True)
class SolverSettings:
    """Solver controls for every fit in a scenario.

    ``lad`` picks the R-Lasso solver: ``"exact"`` solves penalized LAD as a
    linear program, ``"smoothed"`` runs the gradient solver on the smoothed
    absolute loss.
    """

    tol: float = 1e-9
    max_iters: int = 10_000
    lad: str = "exact"

    def __post_init__(self):
        if not (math.isfinite(self.tol) and self.tol > 0):
            raise InvalidArgumentError(f"solver.tol must be positive, got {self.tol!r}")
        if int(self.max_iters) < 1:
            raise InvalidArgumentError(f"solver.max_iters must be >= 1, got {self.max_iters!r}")
        if self.lad not in ("exact", "smoothed"):
            raise InvalidArgumentError(f"solver.lad must be 'exact' or 'smoothed', got {self.lad!r}")


@dataclass(frozen=True)
class Scenario:
    model: Model = Model.HOMOSCEDASTIC
    error: ErrorLaw = ErrorLaw.NORMAL04
    n: int = 100
    p: int = 400
    beta_star: Optional[np.ndarray] = None
    replications: int = 100
    seed: int = 0
    grid: Grid = field(default_factory=Grid)
    n_validation: int = 100
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        object.__setattr__(self, "model", Model(self.model))
        object.__setattr__(self, "error", ErrorLaw(self.error))
        if self.n < 1 or self.p < 1:
            raise InvalidArgumentError("n and p must be positive")
        beta = default_beta_star(self.p) if self.beta_star is None else np.asarray(self.beta_star, dtype=float)
        if beta.shape != (self.p,):
            raise ShapeError(f"beta_star must have length p={self.p}, got {beta.shape}")
        object.__setattr__(self, "beta_star", beta)
        if self.replications < 1 or self.n_validation < 1:
            raise InvalidArgumentError("replications and n_validation must be >= 1")
        if self.model is Model.HETEROSCEDASTIC and not np.any(beta):
            raise InvalidArgumentError("heteroscedastic model needs a nonzero beta_star")

    @property
    def support(self):
        return np.flatnonzero(self.beta_star)

    @property
    def c(self):
        return hetero_constant(self.beta_star)


def generate(scenario: Scenario, replication_index: int, purpose="replication") -> Dataset:
    """Draw one dataset; the stream depends only on (seed, purpose, index)."""
    rng = make_rng(scenario.seed, purpose, replication_index)
    X = rng.standard_normal((scenario.n, scenario.p))
    eps = sample_error(scenario.error, rng, scenario.n)
    lin = X @ scenario.beta_star
    if scenario.model is Model.HOMOSCEDASTIC:
        y = lin + eps
    else:
        y = lin + noise_multiplier(X, scenario.beta_star) * eps
    return Dataset(X, y)


@dataclass(frozen=True)
class Metrics:
    l2: float
    l1: float
    fp: int
    fn: int


def compute_metrics(beta_hat, beta_star, zero_tol=ZERO_TOL) -> Metrics:
    """L2 and L1 estimation error, false positives and false negatives."""
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta_star = np.asarray(beta_star, dtype=float)
    if beta_hat.shape != beta_star.shape or beta_hat.ndim != 1:
        raise ShapeError(f"shape mismatch {beta_hat.shape} vs {beta_star.shape}")
    diff = beta_hat - beta_star
    selected = np.abs(beta_hat) > zero_tol
    signal = beta_star != 0
    return Metrics(
        l2=math.sqrt(math.fsum(diff * diff)),
        l1=math.fsum(np.abs(diff)),
        fp=int(np.count_nonzero(selected & ~signal)),
        fn=int(np.count_nonzero(~selected & signal)),
    )


def relative_gain(err_method, err_ra, err_oracle) -> float:
    """``(err_method - err_oracle) / (err_ra - err_oracle)``; above 1 favours RA-Lasso."""
    denom = err_ra - err_oracle
    if not denom > 0:
        raise DegenerateGainError(
            f"RA-Lasso error {err_ra} does not exceed the oracle error {err_oracle}")
    return (err_method - err_oracle) / denom
