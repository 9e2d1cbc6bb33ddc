"""Quadrature, fixed-point iteration, and scalar maximization."""

import math

import numpy as np
import pytest

from binoisy.numerics import (
    FixedPointError,
    damped_fixed_point,
    gaussian_expectation,
    hermgauss_nodes,
    logsumexp,
    maximize_scalar,
    mixture_expectation,
    real_mixture_expectation,
)


def test_hermgauss_integrates_moments_exactly():
    # order-n rules are exact for polynomials up to degree 2n-1
    t, w = hermgauss_nodes(8)
    x = math.sqrt(2.0) * t  # standard normal samples
    assert float(w.sum()) == pytest.approx(1.0, rel=1e-14)
    assert float(w @ x**2) == pytest.approx(1.0, rel=1e-13)
    assert float(w @ x**4) == pytest.approx(3.0, rel=1e-13)
    assert float(w @ x**6) == pytest.approx(15.0, rel=1e-12)


def test_hermgauss_order_limits():
    with pytest.raises(ValueError):
        hermgauss_nodes(0)
    with pytest.raises(ValueError):
        hermgauss_nodes(193)


def test_logsumexp_matches_naive_and_survives_large_inputs():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((4, 6))
    assert np.allclose(logsumexp(a), np.log(np.exp(a).sum(axis=-1)))
    big = np.array([1e4, 1e4 + 1.0])
    assert logsumexp(big) == pytest.approx(1e4 + 1.0 + math.log1p(math.exp(-1.0)))


def test_complex_gaussian_expectation_second_moment():
    # E|z|^2 = |mean|^2 + variance for circular complex z
    val = gaussian_expectation(lambda z: np.abs(z) ** 2, 1.0 - 2.0j, 3.0, order=24)
    assert val == pytest.approx(5.0 + 3.0, rel=1e-12)


def test_mixture_expectation_averages_components():
    comps = [(0.0 + 0j, 1.0), (2.0 + 0j, 0.5)]
    val = mixture_expectation(comps, lambda z: np.abs(z) ** 2, order=24)
    assert val == pytest.approx((1.0 + 4.5) / 2.0, rel=1e-12)
    with pytest.raises(ValueError):
        mixture_expectation([], lambda z: z)
    with pytest.raises(ValueError):
        mixture_expectation([(0.0, -1.0)], lambda z: np.abs(z))


def test_real_mixture_expectation_matches_complex_marginal():
    # a real N(m, v) axis is the I marginal of a circular complex Gaussian
    # with total variance 2v
    means = np.array([-1.0, 1.0])
    direct = real_mixture_expectation(means, 0.5, lambda y: y**2, order=32)
    assert direct == pytest.approx(1.0 + 0.5, rel=1e-12)


def test_damped_fixed_point_converges_on_contraction():
    res = damped_fixed_point(lambda x: np.cos(x), [0.3], damping=1.0)
    assert res.converged
    assert res.solution[0] == pytest.approx(0.7390851332151607, abs=1e-9)


def test_damped_fixed_point_branch_depends_on_seed():
    # x -> x^2 has fixed points {0, 1}; seeds on either side of 1 must land
    # on their own basin, which is how multi-start branch hunting works
    low = damped_fixed_point(lambda x: x**2, [0.5], damping=1.0)
    assert low.converged and low.solution[0] == pytest.approx(0.0, abs=1e-8)
    high = damped_fixed_point(lambda x: np.sqrt(x), [9.0], damping=1.0)
    assert high.converged and high.solution[0] == pytest.approx(1.0, abs=1e-6)


def test_damped_fixed_point_guards():
    with pytest.raises(ValueError):
        damped_fixed_point(lambda x: x, [1.0], damping=0.0)
    with pytest.raises(FixedPointError):
        damped_fixed_point(lambda x: x * np.inf, [1.0])
    res = damped_fixed_point(lambda x: 1.0 + x, [0.0], max_iter=5)
    assert not res.converged
    assert res.iterations == 5
    # nonneg clamp keeps variance-like unknowns in range
    res = damped_fixed_point(lambda x: -np.ones_like(x), [1.0], damping=1.0)
    assert res.converged and res.solution[0] == 0.0


def test_maximize_scalar_refines_past_the_seed_grid():
    f = lambda s: -(math.log(s) - 0.7) ** 2
    seeds = np.logspace(-2, 2, 9)
    x, v = maximize_scalar(f, seeds, refine_tol=1e-10)
    assert x == pytest.approx(math.exp(0.7), rel=1e-4)
    assert v == pytest.approx(0.0, abs=1e-9)


def test_maximize_scalar_never_returns_below_best_seed():
    seeds = [0.5, 1.0, 2.0]
    f = lambda s: 1.0 if s == 1.0 else 0.0  # flat except at one seed
    x, v = maximize_scalar(f, seeds)
    assert v >= 1.0
    assert x == pytest.approx(1.0)


def test_maximize_scalar_tolerates_minus_inf_regions():
    f = lambda s: -math.inf if s > 1.5 else s
    x, v = maximize_scalar(f, [0.5, 1.0, 4.0])
    assert v == pytest.approx(x)
    assert x <= 1.5


def test_maximize_scalar_input_validation():
    with pytest.raises(ValueError):
        maximize_scalar(lambda s: s, [])
    with pytest.raises(ValueError):
        maximize_scalar(lambda s: s, [-1.0, 1.0])
    with pytest.raises(ValueError):
        maximize_scalar(lambda s: -math.inf, [1.0, 2.0])
