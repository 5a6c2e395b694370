import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from qmarket.demand import (
    BackgroundDistribution,
    DemandPMF,
    discretize,
    load_piecewise,
    parse_distribution,
    sample_demand,
    validate_for_equilibrium,
)
from qmarket.errors import InvalidArgument, UnsupportedDemand

from conftest import DISTS

piecewise_g = BackgroundDistribution.piecewise([0, 0.2, 0.45, 0.7, 1.0], [1.0, 0.3, 2.0, 0.8])


def test_uniform_bins():
    np.testing.assert_allclose(discretize(BackgroundDistribution.uniform(), 5).probs, [0.2] * 5, rtol=0, atol=1e-15)


@pytest.mark.parametrize(
    "dist, expected",
    [
        (BackgroundDistribution.power_left(2), np.array([1, 7, 19, 37, 61]) / 125),
        (BackgroundDistribution.power_right(2), np.array([61, 37, 19, 7, 1]) / 125),
    ],
)
def test_power_bins_closed_form(dist, expected):
    probs = discretize(dist, 5).probs
    np.testing.assert_allclose(probs, expected, rtol=1e-13)
    # independent check: adaptive quadrature of the density itself
    quadrature = [quad(lambda x: float(dist.density(x)), i / 5, (i + 1) / 5, epsabs=1e-14)[0] for i in range(5)]
    np.testing.assert_allclose(probs, quadrature, rtol=1e-10)


def test_piecewise_bins_match_quadrature():
    probs = discretize(piecewise_g, 7).probs
    edges = np.arange(8) / 7
    quadrature = [
        quad(lambda x: float(piecewise_g.density(x)), a, b, points=piecewise_g.breakpoints[1:-1], limit=200)[0]
        for a, b in zip(edges[:-1], edges[1:])
    ]
    np.testing.assert_allclose(probs, quadrature, rtol=1e-9)


def test_discretize_rejects_small_n():
    with pytest.raises(InvalidArgument):
        discretize(BackgroundDistribution.uniform(), 1)


ALL_DISTS = list(DISTS.values()) + [piecewise_g, BackgroundDistribution.power_left(0.5)]


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(ALL_DISTS), st.integers(2, 64))
def test_discretize_sums_to_one_and_refines(dist, N):
    coarse = discretize(dist, N).probs
    assert abs(coarse.sum() - 1) <= 1e-12
    assert np.all(coarse >= 0)
    fine = discretize(dist, 2 * N).probs
    np.testing.assert_allclose(fine[0::2] + fine[1::2], coarse, rtol=0, atol=1e-12)


def test_single_segment_piecewise_equals_power_zero():
    for N in (2, 5, 17):
        a = discretize(BackgroundDistribution.piecewise([0, 1], [3.7]), N).probs
        b = discretize(BackgroundDistribution.power_left(0), N).probs
        np.testing.assert_allclose(a, b, atol=1e-15)


def test_piecewise_is_normalized():
    lv = np.array(piecewise_g.levels)
    assert abs(np.sum(lv * np.diff(piecewise_g.breakpoints)) - 1) < 1e-12


def test_validate_for_equilibrium():
    validate_for_equilibrium(DemandPMF([0.2] * 5))
    with pytest.raises(UnsupportedDemand, match="pi_1"):
        validate_for_equilibrium(DemandPMF([0, 0.5, 0.5]))
    with pytest.raises(UnsupportedDemand, match="pi_N"):
        validate_for_equilibrium(DemandPMF([0.5, 0.5, 0]))


def test_demand_pmf_rejects_bad_vectors():
    with pytest.raises(InvalidArgument):
        DemandPMF([0.5, 0.4])
    with pytest.raises(InvalidArgument):
        DemandPMF([1.5, -0.5])


def test_sample_degenerate():
    gen = np.random.default_rng(0)
    assert all(sample_demand(DemandPMF([1, 0, 0]), gen) == 1 for _ in range(100))


def test_sample_deterministic():
    pmf = discretize(BackgroundDistribution.power_left(), 6)
    a = sample_demand(pmf, np.random.default_rng(7), 1000)
    b = sample_demand(pmf, np.random.default_rng(7), 1000)
    np.testing.assert_array_equal(a, b)


def test_sample_frequencies():
    draws = sample_demand(discretize(BackgroundDistribution.uniform(), 5), np.random.default_rng(3), 10**6)
    freq = np.bincount(draws, minlength=6)[1:] / 10**6
    assert np.all(np.abs(freq - 0.2) <= 3 * np.sqrt(0.2 * 0.8 / 10**6))


def test_load_piecewise(tmp_path):
    f = tmp_path / "g.txt"
    f.write_text("# a density\n0.25 2\n0.5 0   # gap\n\n1.0 1\n", encoding="utf-8")
    dist = load_piecewise(f)
    assert dist.breakpoints == (0.0, 0.25, 0.5, 1.0)
    np.testing.assert_allclose(dist.levels, np.array([2, 0, 1]) / 1.0)
    assert parse_distribution(f"piecewise:{f}").levels == dist.levels


def test_load_piecewise_requires_final_one(tmp_path):
    f = tmp_path / "g.txt"
    f.write_text("0.5 1\n0.9 1\n", encoding="utf-8")
    with pytest.raises(InvalidArgument, match="final breakpoint"):
        load_piecewise(f)


def test_parse_distribution():
    assert parse_distribution("uniform").kind == "uniform"
    assert parse_distribution("power-left").exponent == 2
    assert parse_distribution("power-right:3").exponent == 3
    with pytest.raises(InvalidArgument):
        parse_distribution("normal")
