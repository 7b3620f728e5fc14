"""Compiled inner loop of the composite gradient solver.

Mirrors ``loss._value``/``loss._deriv`` and ``optimizer.lqa_step`` scalar by
scalar; the tests check the two paths against each other.
"""

import math

import numpy as np
from numba import njit

SQUARE, HUBER, CATONI, SMOOTHED_LAD = 0, 1, 2, 3

_KNOT_AREA = 2.0 - math.pi / 2.0
_LOG2 = math.log(2.0)


@njit(cache=True)
def _catoni_area(u):
    if u < 0.1:
        u2 = u * u
        u4 = u2 * u2
        u8 = u4 * u4
        u12 = u8 * u4
        return (0.5 * u2 - u4 / 24.0 - u4 * u / 40.0 - u4 * u2 / 120.0
                + u8 / 448.0 + u8 * u / 576.0 + u8 * u2 / 1440.0
                - u12 / 4224.0 - u12 * u / 4992.0 - u12 * u2 / 11648.0)
    if u < 1.0:
        w = u - 1.0
        g = w * math.log((w * w + 1.0) / 2.0) - 2.0 * w + 2.0 * math.atan(w)
        return _KNOT_AREA - g
    return _KNOT_AREA + _LOG2 * (u - 1.0)


@njit(cache=True)
def _loss_value(kind, a, x):
    if kind == SQUARE:
        return x * x
    ax = abs(x)
    if kind == HUBER:
        if ax <= 1.0 / a:
            return x * x
        return 2.0 * ax / a - 1.0 / (a * a)
    if kind == CATONI:
        return (2.0 / (a * a)) * _catoni_area(abs(a * x))
    if ax <= a:
        return x * x / (2.0 * a)
    return ax - a / 2.0


@njit(cache=True)
def _loss_deriv(kind, a, x):
    if kind == SQUARE:
        return 2.0 * x
    if kind == HUBER:
        if abs(x) <= 1.0 / a:
            return 2.0 * x
        return 2.0 / a if x > 0 else -2.0 / a
    if kind == CATONI:
        t = a * x
        u = min(abs(t), 1.0)
        v = -math.log1p(-u + 0.5 * u * u)
        if t < 0:
            v = -v
        elif t == 0:
            v = 0.0
        return (2.0 / a) * v
    z = x / a
    if z > 1.0:
        return 1.0
    if z < -1.0:
        return -1.0
    return z


@njit(cache=True)
def _objective(kind, a, r, beta, lam):
    s = 0.0
    for i in range(r.size):
        s += _loss_value(kind, a, r[i])
    return s / r.size + lam * np.sum(np.abs(beta))


@njit(cache=True)
def _project(v, rho):
    if np.sum(np.abs(v)) <= rho:
        return v
    b = np.sort(np.abs(v))[::-1]
    cums = 0.0
    theta = 0.0
    for j in range(b.size):
        cums += b[j]
        t = (cums - rho) / (j + 1)
        if b[j] - t > 0:
            theta = t
    out = np.empty_like(v)
    for j in range(v.size):
        m = abs(v[j]) - theta
        out[j] = math.copysign(m, v[j]) if m > 0 else 0.0
    return out


@njit(cache=True)
def cgd_loop(X, XT, y, beta, kind, a, gamma, lam, rho, tol, max_iters, trace):
    """Run composite gradient steps in place on ``beta``.

    ``trace[0]`` must hold the starting objective. Returns
    ``(iterations, converged, finite)``.
    """
    n = X.shape[0]
    p = beta.size
    d = np.empty(n)
    thresh = lam / gamma
    r = y - X @ beta
    obj = trace[0]
    it = 0
    while it < max_iters:
        for i in range(n):
            d[i] = _loss_deriv(kind, a, r[i])
        g = XT @ d
        v = np.empty(p)
        for j in range(p):
            z = beta[j] + g[j] / (n * gamma)
            m = abs(z) - thresh
            v[j] = math.copysign(m, z) if m > 0 else 0.0
        v = _project(v, rho)
        for j in range(p):
            beta[j] = v[j]
        r = y - X @ beta
        new = _objective(kind, a, r, beta, lam)
        it += 1
        trace[it] = new
        if not math.isfinite(new):
            return it, False, False
        if obj - new < tol:
            return it, True, True
        obj = new
    return it, False, True
