from functools import partial

import numpy as np
import pytest

from ralasso.errors import InvalidArgumentError
from ralasso.regression import Dataset, fold_indices
from ralasso.simulation import Scenario, generate
from ralasso.tuning import lambda_max, tune_cv, tune_grid

SMALL = Scenario(error="two-t3", n=40, p=15, seed=3)
make = partial(generate, SMALL, purpose="validation")


def test_singleton_grid():
    res = tune_grid("ra-lasso", make, SMALL.beta_star, [(0.3, 1.0)], 2)
    assert (res.lam, res.alpha) == (0.3, 1.0)
    d = make(0)
    res = tune_cv(d, [(0.3, 1.0)], K=4)
    assert (res.lam, res.alpha) == (0.3, 1.0)


def test_huge_penalty_loses():
    res = tune_grid("lasso", make, SMALL.beta_star, [(0.5, None), (1e6, None)], 3)
    assert res.lam == 0.5
    assert res.scores[(1e6, None)] == pytest.approx(np.linalg.norm(SMALL.beta_star))


def test_deterministic_and_worker_independent():
    grid = [(lam, a) for lam in (0.1, 0.5, 2.0) for a in (0.2, 1.0)]
    a = tune_grid("ra-lasso", make, SMALL.beta_star, grid, 3)
    b = tune_grid("ra-lasso", make, SMALL.beta_star, grid, 3, workers=2)
    assert a == b


def test_tie_breaking():
    s = Scenario(error="normal04", n=30, p=10, seed=1)
    mk = partial(generate, s, purpose="validation")
    big = 1e6
    # every huge penalty gives the zero solution, so all tie
    res = tune_grid("ra-lasso", mk, s.beta_star, [(2 * big, 0.5), (big, 2.0), (big, 0.5)], 1)
    assert (res.lam, res.alpha) == (big, 0.5)


def test_empty_grid():
    with pytest.raises(InvalidArgumentError):
        tune_grid("lasso", make, SMALL.beta_star, [], 1)
    with pytest.raises(InvalidArgumentError):
        tune_cv(make(0), [], K=3)


def test_cv_prefers_small_penalty_on_strong_signal(rng):
    X = rng.standard_normal((200, 5))
    y = X @ np.array([3.0, -2.0, 1.0, 0.5, 4.0]) + 0.5 * rng.standard_normal(200)
    res = tune_cv(Dataset(X, y), [(0.01, None), (10.0, None)], K=5, method="lasso")
    assert res.lam == 0.01
    res = tune_cv(Dataset(X, y), [(0.01, None), (10.0, None)], K=5, method="lasso", loss="absolute")
    assert res.lam == 0.01


def test_cv_fold_order_invariance(rng):
    X = rng.standard_normal((50, 4))
    y = X[:, 0] + rng.standard_t(3, 50)
    data = Dataset(X, y)
    folds = fold_indices(50, 5, seed=2)
    grid = [(lam, a) for lam in (0.01, 0.1, 0.3) for a in (0.5, 2.0)]
    a = tune_cv(data, grid, folds=folds)
    b = tune_cv(data, grid, folds=folds[::-1])
    assert a == b
    with pytest.raises(InvalidArgumentError):
        tune_cv(data, grid, loss="huber")


def test_lambda_max_gives_zero_solution():
    from ralasso.regression import fit_method
    d = make(1)
    for method, alpha in (("lasso", None), ("ra-lasso", 0.5), ("r-lasso", None)):
        lm = lambda_max(method, d, alpha)
        assert np.all(fit_method(method, d, lm * 1.0001, alpha).beta == 0)
        assert np.any(fit_method(method, d, lm * 0.9, alpha).beta != 0)
