import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.stats import binom

from qmarket.demand import BackgroundDistribution, DemandPMF, discretize
from qmarket.equilibrium import EquilibriumStrategy, integrand, sample_bid, solve
from qmarket.errors import DomainError, InvalidArgument, UnsupportedDemand


def psi_from_definitions(u, probs, eps=1e-6):
    """(g' - h') / h with H_i, G_i built from binomial pmf / tail, central differences."""
    N = len(probs)
    i = np.arange(1, N + 1)

    def h(x):
        return np.sum(probs * binom.pmf(i - 1, N - 1, x))

    def g(x):
        return np.sum(probs * binom.sf(i - 2, N - 1, x))  # Pr(X >= i-1)

    dh = (h(u + eps) - h(u - eps)) / (2 * eps)
    dg = (g(u + eps) - g(u - eps)) / (2 * eps)
    return (dg - dh) / h(u)


@pytest.mark.parametrize("N", [2, 3, 5, 12, 30])
@pytest.mark.parametrize("u", [0.1, 0.5, 0.9])
def test_integrand_uniform_is_n_minus_one(N, u):
    pmf = discretize(BackgroundDistribution.uniform(), N)
    assert integrand(u, pmf) == pytest.approx(N - 1, rel=1e-12)
    assert psi_from_definitions(u, pmf.probs) == pytest.approx(N - 1, rel=1e-7)


def test_integrand_two_levels_closed_form():
    pmf = DemandPMF([0.25, 0.75])
    for u in (1e-9, 0.3, 0.999):
        assert integrand(u, pmf) == pytest.approx(0.25 / (0.25 + 0.5 * u), rel=1e-12)
    assert integrand(0.5, DemandPMF([0.5, 0.5])) == pytest.approx(1.0)


@pytest.mark.parametrize("name", ["power-left", "power-right"])
@pytest.mark.parametrize("N", [3, 5, 11])
def test_integrand_matches_definitions(name, N):
    dist = BackgroundDistribution.power_left() if name == "power-left" else BackgroundDistribution.power_right()
    pmf = discretize(dist, N)
    for u in (0.05, 0.37, 0.8, 0.97):
        assert integrand(u, pmf) == pytest.approx(psi_from_definitions(u, pmf.probs), rel=1e-6)


def test_integrand_stable_near_one_for_large_n():
    pmf = discretize(BackgroundDistribution.power_right(), 30)
    u = 1 - 1e-7
    assert integrand(u, pmf) == pytest.approx(29 * pmf.probs[28] / pmf.probs[29], rel=1e-4)


def test_integrand_domain():
    pmf = DemandPMF([0.5, 0.5])
    for u in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(DomainError):
            integrand(u, pmf)
    with pytest.raises(UnsupportedDemand):
        integrand(0.5, DemandPMF([0.0, 1.0]))


def test_solve_two_firms_floor():
    s = solve(DemandPMF([0.5, 0.5]), 100.0)
    assert s.p_m == pytest.approx(100 / math.e, rel=1e-12)


@pytest.mark.parametrize("N", [2, 7, 30])
def test_solve_uniform_closed_form(N, strategies):
    s = strategies("uniform", N)
    exact = 100 * np.exp(-(N - 1) * (1 - s.F))
    assert np.max(np.abs(s.p - exact)) / 100 < 1e-8
    v = np.linspace(0, 1, 3337)
    np.testing.assert_allclose(s.quantile(v), 100 * np.exp(-(N - 1) * (1 - v)), rtol=1e-8)


@pytest.mark.parametrize("name", ["uniform", "power-left", "power-right"])
def test_boundary_values(name, strategies):
    s = strategies(name, 9)
    assert s.quantile(1.0) == s.pbar == 100.0
    assert s.cdf(s.pbar) == 1.0
    assert s.cdf(s.p_m) == 0.0
    assert 0 < s.p_m < s.pbar
    assert np.all(np.diff(s.p) > 0)


@pytest.mark.parametrize("name", ["power-left", "power-right"])
def test_solve_against_adaptive_quadrature(name, strategies):
    s = strategies(name, 8)
    for F in (0.0, 0.2, 0.63, 0.95):
        tail = quad(lambda u: integrand(u, s.pmf), max(F, 1e-300), 1, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
        assert s.quantile(F) == pytest.approx(100 * math.exp(-tail), rel=1e-9)


def test_grid_refinement_stability():
    pmf = discretize(BackgroundDistribution.power_left(), 20)
    a = solve(pmf, n_nodes=4097)
    b = solve(pmf, n_nodes=8193)
    assert abs(b.p_m / a.p_m - 1) < 1e-9


@pytest.mark.parametrize("name", ["uniform", "power-left", "power-right"])
@pytest.mark.parametrize("N", [3, 5, 28])
def test_round_trip(name, N, strategies):
    s = strategies(name, N)
    v = np.linspace(0, 1, 1001)
    assert np.max(np.abs(s.cdf(s.quantile(v)) - v)) < 1e-8
    p = np.linspace(s.p_m, s.pbar, 1001)
    assert np.max(np.abs(s.quantile(s.cdf(p)) / p - 1)) < 1e-8


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=12))
def test_random_demand_gives_monotone_strategy(weights):
    w = np.array(weights)
    s = solve(DemandPMF(w / w.sum()), 50.0, n_nodes=513)
    assert np.all(np.diff(s.p) > 0)
    assert s.quantile(1.0) == 50.0
    v = np.linspace(0, 1, 101)
    assert np.max(np.abs(s.cdf(s.quantile(v)) - v)) < 1e-8


def test_cdf_uniform_closed_form(strategies):
    s = strategies("uniform", 5)
    assert s.cdf(100 * math.exp(-2)) == pytest.approx(0.5, abs=1e-12)
    p = np.linspace(s.p_m, 100, 50)
    np.testing.assert_allclose(s.cdf(p), 1 + np.log(p / 100) / 4, atol=1e-12)
    assert s.cdf(0.0) == 0.0 and s.cdf(150.0) == 1.0


def test_sample_bid_deterministic(strategies):
    s = strategies("power-left", 6)
    a = [sample_bid(s, np.random.default_rng(4)) for _ in range(3)]
    assert a[0] == a[1] == a[2]
    np.testing.assert_array_equal(s.sample(np.random.default_rng(9), 100), s.sample(np.random.default_rng(9), 100))


def test_sample_bid_ks(strategies):
    s = strategies("uniform", 5)
    n = 10**6
    x = np.sort(s.sample(np.random.default_rng(2024), n))
    F = 1 + np.log(x / 100) / 4
    k = np.arange(1, n + 1) / n
    ks = max(np.max(k - F), np.max(F - (k - 1 / n)))
    assert ks < 1.95 / math.sqrt(n)


def test_solve_rejects_bad_input():
    with pytest.raises(InvalidArgument):
        solve(DemandPMF([0.5, 0.5]), 0.0)
    with pytest.raises(UnsupportedDemand):
        solve(DemandPMF([0.5, 0.5, 0.0]))


def test_json_round_trip(strategies):
    s = strategies("power-right", 7)
    back = EquilibriumStrategy.from_dict(json.loads(json.dumps(s.to_dict())))
    v = np.linspace(0, 1, 77)
    np.testing.assert_array_equal(back.quantile(v), s.quantile(v))
    assert back.p_m == s.p_m
