import math

import numpy as np
import pytest

from ralasso.errors import DegenerateGainError, InvalidArgumentError, ShapeError
from ralasso.rng import make_rng
from ralasso.simulation import (
    ErrorLaw, Model, Scenario, compute_metrics, default_beta_star, generate, hetero_constant,
    noise_multiplier, relative_gain, sample_error,
)

LAWS = [ErrorLaw.NORMAL04, ErrorLaw.TWO_T3, ErrorLaw.MIXN, ErrorLaw.LOGNORMAL, ErrorLaw.WEIBULL]


def test_centering_constants():
    assert ErrorLaw.NORMAL04.centering == 0.0
    assert ErrorLaw.TWO_T3.centering == 0.0
    assert ErrorLaw.MIXN.centering == 3.5
    assert ErrorLaw.LOGNORMAL.centering == pytest.approx(math.exp(1.72), rel=1e-15)
    assert ErrorLaw.LOGNORMAL.centering == pytest.approx(5.58453, abs=1e-5)
    assert ErrorLaw.WEIBULL.centering == pytest.approx(0.5 * math.gamma(1 + 1 / 0.3), rel=1e-15)
    # 0.5 * Gamma(13/3) = 4.6303...
    assert ErrorLaw.WEIBULL.centering == pytest.approx(4.6303, abs=1e-4)


def test_mixture_variance():
    assert ErrorLaw.MIXN.variance == pytest.approx(22.75, rel=1e-15)
    assert ErrorLaw.TWO_T3.variance == 12.0


@pytest.mark.parametrize("law", LAWS, ids=lambda l: l.value)
def test_draws_are_centered(law):
    eps = sample_error(law, make_rng(99, "centering", law.value), 1_000_000)
    se = math.sqrt(law.variance / eps.size)
    assert abs(eps.mean()) < 5 * se


@pytest.mark.parametrize("law", [ErrorLaw.NORMAL04, ErrorLaw.MIXN], ids=lambda l: l.value)
def test_light_tailed_variances(law):
    eps = sample_error(law, make_rng(5, "variance", law.value), 1_000_000)
    # standard error of the sample variance is sqrt((m4 - s^4) / n)
    se = math.sqrt((np.mean(eps ** 4) - law.variance ** 2) / eps.size)
    assert abs(eps.var() - law.variance) < 3 * se


def test_scalar_draw():
    assert isinstance(sample_error(ErrorLaw.WEIBULL, make_rng(1)), float)


def test_hetero_constant_and_normalization():
    beta = default_beta_star()
    assert hetero_constant(beta) == pytest.approx(180 * math.sqrt(3), rel=1e-15)
    assert hetero_constant(beta) == pytest.approx(311.769, abs=1e-3)
    X = make_rng(3, "hetero").standard_normal((1_000_000, 20))
    m = noise_multiplier(X, np.full(20, 3.0))
    assert np.mean(m * m) == pytest.approx(1.0, rel=0.01)


def test_generate_noiseless_and_zero_beta():
    s = Scenario(error="normal04", n=30, p=10, beta_star=np.zeros(10))
    d = generate(s, 0)
    np.testing.assert_array_equal(d.y, sample_error(ErrorLaw.NORMAL04, _stream(s, 0), 30))
    s = Scenario(model="heteroscedastic", error="zero", n=30, p=10)
    d = generate(s, 2)
    np.testing.assert_array_equal(d.y, d.X @ s.beta_star)


def _stream(s, i):
    rng = make_rng(s.seed, "replication", i)
    rng.standard_normal((s.n, s.p))
    return rng


def test_generate_is_deterministic_and_indexed():
    s = Scenario(error="lognormal", n=20, p=5, seed=11)
    a, b, c = generate(s, 4), generate(s, 4), generate(s, 5)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    assert not np.array_equal(a.X, c.X)
    assert not np.array_equal(generate(s, 4, "validation").X, a.X)


def test_scenario_defaults_and_validation():
    s = Scenario()
    assert (s.n, s.p) == (100, 400)
    assert np.count_nonzero(s.beta_star) == 20 and s.beta_star[:20].tolist() == [3.0] * 20
    assert s.c == pytest.approx(311.769, abs=1e-3)
    with pytest.raises(ShapeError):
        Scenario(p=10, beta_star=np.ones(3))
    with pytest.raises(InvalidArgumentError):
        Scenario(model=Model.HETEROSCEDASTIC, p=4, beta_star=np.zeros(4))
    with pytest.raises(ValueError):
        Scenario(error="cauchy")


def test_metrics_examples():
    beta = np.array([3.0, 3.0, 0.0, 0.0])
    assert compute_metrics(beta, beta) == (compute_metrics(beta, beta).__class__)(0.0, 0.0, 0, 0)
    m = compute_metrics(np.array([2.5, 0.0, 1.0, 0.0]), beta)
    assert m.l2 == pytest.approx(math.sqrt(10.25), rel=1e-15)
    assert (m.l1, m.fp, m.fn) == (4.5, 1, 1)
    z = compute_metrics(np.zeros(4), beta)
    assert (z.fp, z.fn) == (0, 2)
    with pytest.raises(ShapeError):
        compute_metrics(np.zeros(3), beta)


def test_metrics_permutation_invariance(rng):
    b, s = rng.standard_normal(30), np.where(rng.random(30) < 0.3, 2.0, 0.0)
    b[rng.random(30) < 0.5] = 0
    perm = rng.permutation(30)
    assert compute_metrics(b, s) == pytest.approx(compute_metrics(b[perm], s[perm]))
    m = compute_metrics(b, s)
    assert m.fn <= np.count_nonzero(s) and m.fp <= 30 - np.count_nonzero(s)


def test_relative_gain():
    assert relative_gain(4, 3, 2) == 2.0
    assert relative_gain(3.3, 3.3, 1.0) == 1.0
    with pytest.raises(DegenerateGainError):
        relative_gain(4, 2, 2)
