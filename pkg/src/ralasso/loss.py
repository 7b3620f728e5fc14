"""Scalar loss families, their derivatives and influence functions.

Four families are supported: square, RA-quadratic (Huber with a
robustification parameter ``alpha``), Catoni and a smoothed absolute loss.
All functions accept scalars or numpy arrays and broadcast.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, ShapeError

LOG2 = math.log(2.0)
# integral of the Catoni influence function over [0, 1]
_CATONI_KNOT_AREA = 2.0 - math.pi / 2.0
# power-series coefficients (degree 2..14) of the Catoni antiderivative near 0
_CATONI_SERIES = (
    (2, 1 / 2), (4, -1 / 24), (5, -1 / 40), (6, -1 / 120), (8, 1 / 448),
    (9, 1 / 576), (10, 1 / 1440), (12, -1 / 4224), (13, -1 / 4992),
    (14, -1 / 11648),
)
_SERIES_CUTOFF = 0.1


class LossKind(str, enum.Enum):
    SQUARE = "square"
    RA_QUADRATIC = "ra-quadratic"
    CATONI = "catoni"
    SMOOTHED_LAD = "smoothed-lad"


@dataclass(frozen=True)
class LossSpec:
    """Loss family plus its parameter.

    ``alpha`` is the robustification parameter for RA-quadratic and Catoni
    losses and the smoothing half-width for the smoothed absolute loss. It is
    ignored for the square loss.
    """

    kind: LossKind
    alpha: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind(self.kind))
        if self.kind is not LossKind.SQUARE:
            if not (math.isfinite(self.alpha) and self.alpha > 0):
                raise InvalidArgumentError(
                    f"{self.kind.value} loss needs a positive finite parameter, got {self.alpha!r}")

    @classmethod
    def square(cls):
        return cls(LossKind.SQUARE)

    @classmethod
    def ra_quadratic(cls, alpha):
        return cls(LossKind.RA_QUADRATIC, alpha)

    @classmethod
    def catoni(cls, alpha):
        return cls(LossKind.CATONI, alpha)

    @classmethod
    def smoothed_lad(cls, delta=1e-2):
        return cls(LossKind.SMOOTHED_LAD, delta)

    @property
    def curvature(self):
        """Upper bound on the second derivative of the loss in the residual."""
        if self.kind is LossKind.SMOOTHED_LAD:
            return 1.0 / self.alpha
        return 2.0


def _check_finite(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("input must be finite")
    return arr


def _check_alpha(alpha):
    if not (math.isfinite(alpha) and alpha > 0):
        raise InvalidArgumentError(f"alpha must be positive and finite, got {alpha!r}")


def _out(arr):
    return float(arr) if arr.ndim == 0 else arr


def huber_value(x, alpha):
    """RA-quadratic loss: ``x**2`` inside ``|x| <= 1/alpha``, linear beyond."""
    _check_alpha(alpha)
    return _out(_huber_value(_check_finite(x), alpha))


def _huber_value(x, alpha):
    ax = np.abs(x)
    knot = 1.0 / alpha
    return np.where(ax <= knot, x * x, 2.0 * ax / alpha - 1.0 / alpha ** 2)


def huber_psi(x):
    """Influence function of the RA-quadratic loss, ``x`` clipped to [-1, 1]."""
    return _out(np.clip(_check_finite(x), -1.0, 1.0))


def catoni_psi(t):
    """Catoni influence function; saturates at ``log 2`` for ``|t| >= 1``."""
    return _out(_catoni_psi(_check_finite(t)))


def _catoni_psi(t):
    at = np.minimum(np.abs(t), 1.0)
    # -log(1 - u + u^2/2) at u = 1 is exactly log 2, so the clip handles the tail
    inner = -np.log1p(-at + 0.5 * at * at)
    return np.sign(t) * inner


def _catoni_area(u):
    """Integral of the Catoni influence function over [0, u] for u >= 0."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    small = u < _SERIES_CUTOFF
    mid = (~small) & (u < 1.0)
    big = u >= 1.0
    if np.any(small):
        us = u[small]
        acc = np.zeros_like(us)
        for power, coef in reversed(_CATONI_SERIES):
            acc += coef * us ** power
        out[small] = acc
    if np.any(mid):
        w = u[mid] - 1.0
        g = w * np.log((w * w + 1.0) / 2.0) - 2.0 * w + 2.0 * np.arctan(w)
        out[mid] = _CATONI_KNOT_AREA - g
    if np.any(big):
        out[big] = _CATONI_KNOT_AREA + LOG2 * (u[big] - 1.0)
    return out


def _value(spec, x):
    kind = spec.kind
    if kind is LossKind.SQUARE:
        return x * x
    if kind is LossKind.RA_QUADRATIC:
        return _huber_value(x, spec.alpha)
    if kind is LossKind.CATONI:
        a = spec.alpha
        return (2.0 / (a * a)) * _catoni_area(np.abs(a * x))
    d = spec.alpha
    ax = np.abs(x)
    return np.where(ax <= d, x * x / (2.0 * d), ax - d / 2.0)


def _deriv(spec, x):
    kind = spec.kind
    if kind is LossKind.SQUARE:
        return 2.0 * x
    if kind is LossKind.RA_QUADRATIC:
        a = spec.alpha
        return np.where(np.abs(x) <= 1.0 / a, 2.0 * x, (2.0 / a) * np.sign(x))
    if kind is LossKind.CATONI:
        a = spec.alpha
        return (2.0 / a) * _catoni_psi(a * x)
    d = spec.alpha
    return np.clip(x / d, -1.0, 1.0)


def loss_value(spec: LossSpec, x):
    """Loss of residual(s) ``x`` under ``spec``. Every family is even and zero at 0."""
    return _out(np.asarray(_value(spec, _check_finite(x)), dtype=float))


def loss_deriv(spec: LossSpec, x):
    """Derivative of :func:`loss_value` with respect to the residual."""
    return _out(np.asarray(_deriv(spec, _check_finite(x)), dtype=float))


def _residuals(X, y, beta):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or beta.ndim != 1:
        raise ShapeError("expected X of shape (n, p), y of shape (n,) and beta of shape (p,)")
    if X.shape[0] != y.shape[0] or X.shape[1] != beta.shape[0]:
        raise ShapeError(f"inconsistent shapes X{X.shape}, y{y.shape}, beta{beta.shape}")
    return X, y - X @ beta


def empirical_loss(spec: LossSpec, X, y, beta) -> float:
    """Mean loss of the residuals ``y - X @ beta``."""
    _, r = _residuals(X, y, beta)
    return float(np.mean(_value(spec, r)))


def empirical_gradient(spec: LossSpec, X, y, beta) -> np.ndarray:
    """Gradient of :func:`empirical_loss` with respect to ``beta``.

    Returns ``-(1/n) * X.T @ loss_deriv(r)``, a true descent gradient.
    """
    X, r = _residuals(X, y, beta)
    return -(X.T @ _deriv(spec, r)) / X.shape[0]
