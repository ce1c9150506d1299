import math

import numpy as np
import pytest
from scipy import stats

from glam.errors import DomainError, UnsupportedError
from glam.simulators import (SIMULATORS, analytic_reference, asian_average, asian_ito_mean, asian_moments,
                             black_scholes_terminal, get_simulator, heteroskedastic_5d,
                             heteroskedastic_5d_moments, oracle_gaussian_reference, sir_expected_infected,
                             sir_gillespie, sir_trajectory, stream_rng, stream_seed, true_moments)

from .oracles.sir_bruteforce import mean_new_infections


@pytest.mark.parametrize("name,x", [("black-scholes", [0.05, 0.2]), ("heteroskedastic-5d", [0.5] * 5),
                                    ("asian", [0.05, 0.2]), ("sir", [1500, 100])])
def test_deterministic_given_seed(name, x):
    sim = get_simulator(name)
    a = sim.run(np.array(x, float), stream_rng(3, name), 50)
    b = sim.run(np.array(x, float), stream_rng(3, name), 50)
    np.testing.assert_array_equal(a, b)


def test_streams_differ():
    a = stream_rng(0, "sir", 1).random(4)
    b = stream_rng(0, "sir", 2).random(4)
    c = stream_rng(1, "sir", 1).random(4)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)
    assert stream_seed(0, "x", 5).spawn_key == stream_seed(0, "x", 5).spawn_key


def test_black_scholes_ks():
    x = np.array([0.07, 0.33])
    draws = black_scholes_terminal(x, np.random.default_rng(0), 100_000)
    dist = stats.lognorm(s=0.33, scale=math.exp(0.07 - 0.33 ** 2 / 2))
    assert stats.kstest(draws, dist.cdf).pvalue > 0.01


def test_black_scholes_moments():
    assert true_moments("black-scholes", [0.05, 0.2]) == pytest.approx(
        (math.exp(0.05), math.exp(0.1) * math.expm1(0.04)))
    ref = analytic_reference("black-scholes", [0.05, 0.2])
    assert ref(0.5) == pytest.approx(math.exp(0.05 - 0.02))


def test_heteroskedastic_extremes():
    _, s_lo = heteroskedastic_5d_moments(np.full(5, 1e-12))
    _, s_hi = heteroskedastic_5d_moments(np.ones(5))
    assert s_lo ** 2 == pytest.approx(1.0, abs=1e-9)
    assert s_hi ** 2 == pytest.approx(math.exp(3.0), rel=1e-14)
    assert s_hi == pytest.approx(math.exp(1.5), rel=1e-14)


def test_heteroskedastic_mean_by_hand():
    x = np.array([0.2, 0.4, 0.6, 0.8, 1.0])
    j = np.arange(1, 6)
    mu = (3 - j @ x + j @ x ** 3 / 5 + j @ np.log(x ** 2 + x ** 4) / 15
          + 0.2 * 0.4 ** 2 - 1.0 * 0.6 + 0.4 * 0.8)
    assert heteroskedastic_5d_moments(x)[0] == pytest.approx(mu, rel=1e-14)
    draws = heteroskedastic_5d(x, np.random.default_rng(1), 200_000)
    assert draws.mean() == pytest.approx(mu, abs=5 * math.exp(0.5 * j @ x / 5) / math.sqrt(2e5))
    with pytest.raises(DomainError):
        heteroskedastic_5d_moments(np.zeros(5))


def test_asian_mean_and_variance():
    x = np.array([0.08, 0.35])
    mean, var = asian_moments(x)
    # the discrete average is close to the continuous one
    assert mean == pytest.approx(asian_ito_mean(x), rel=1e-3)
    draws = asian_average(x, np.random.default_rng(2), 20_000)
    assert abs(draws.mean() - mean) < 5 * math.sqrt(var / draws.size)
    assert draws.var() == pytest.approx(var, rel=0.05)


def test_asian_average_within_path_range():
    # same increments as the simulator, so the path can be rebuilt
    x = np.array([0.05, 0.3])
    a = asian_average(x, np.random.default_rng(5), 7)
    rng = np.random.default_rng(5)
    inc = (0.05 - 0.045) * 1e-3 + 0.3 * math.sqrt(1e-3) * rng.standard_normal((7, 1000))
    paths = np.exp(np.cumsum(inc, axis=1))
    np.testing.assert_allclose(a, paths.mean(axis=1), rtol=1e-13)
    assert np.all(paths.min(axis=1) <= a) and np.all(a <= paths.max(axis=1))


def test_sir_conservation():
    rng = np.random.default_rng(0)
    for _ in range(20):
        hist = sir_trajectory([rng.integers(1200, 1800), rng.integers(20, 200)], rng)
        assert np.all(hist[:, 1:].sum(axis=1) == 2000)
        assert np.all(np.diff(hist[:, 0]) >= 0)
        assert hist[-1, 2] == 0


def test_sir_nonpositive_output():
    out = sir_gillespie([1500, 100], np.random.default_rng(0), 300)
    assert out.dtype.kind == "i" and np.all(out <= 0)


def test_sir_mean_matches_exact_chain():
    exact = sir_expected_infected(1500, 100)
    out = -sir_gillespie([1500, 100], np.random.default_rng(1), 4000)
    assert out.mean() == pytest.approx(exact, abs=4 * out.std() / math.sqrt(out.size))


@pytest.mark.parametrize("s0,i0", [(1500, 100), (1200, 20)])
def test_sir_exact_chain_against_brute_force(s0, i0):
    # standard error of 4000 runs is below 1 infection at these points
    assert mean_new_infections(s0, i0, 4000, seed=3) == pytest.approx(sir_expected_infected(s0, i0), abs=4.0)


def test_sir_exact_chain_small_case():
    # s0 = 1, i0 = 1: one infection happens before the recovery with probability p
    p = 0.5 / (0.5 + 0.5 * 2000)
    assert sir_expected_infected(1, 1) == pytest.approx(p, rel=1e-12)
    assert sir_expected_infected(0, 5) == 0.0
    assert sir_expected_infected(10, 0) == 0.0


def test_sir_edge_inputs():
    assert np.all(sir_gillespie([1500, 0], np.random.default_rng(0), 5) == 0)
    with pytest.raises(DomainError):
        sir_gillespie([1950, 100], np.random.default_rng(0), 1)


def test_oracle_references():
    ref = oracle_gaussian_reference("asian", [0.05, 0.2])
    mean, var = asian_moments([0.05, 0.2])
    assert ref(0.5) == pytest.approx(mean)
    assert ref.std == pytest.approx(math.sqrt(var))
    with pytest.raises(UnsupportedError):
        true_moments("sir", [1500, 100])
    with pytest.raises(UnsupportedError):
        analytic_reference("asian", [0.05, 0.2])
    with pytest.raises(UnsupportedError):
        get_simulator("lotka-volterra")


def test_registry():
    assert set(SIMULATORS) == {"black-scholes", "heteroskedastic-5d", "asian", "sir"}
    assert SIMULATORS["sir"].integer_output and SIMULATORS["heteroskedastic-5d"].dim == 5
