"""Benchmark stochastic simulators and their known reference distributions.

Every simulator takes an input point ``x``, a ``numpy.random.Generator`` and
a number of draws, and returns a 1-d array of outputs.
"""

import math
import zlib
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import signal, stats

from . import _backend
from .errors import DomainError, UnsupportedError
from .metrics import lognormal_view, normal_view
from .pce import MarginalSpec, Uniform

__all__ = [
    "SimulatorSpec",
    "SIMULATORS",
    "get_simulator",
    "stream_seed",
    "stream_rng",
    "black_scholes_terminal",
    "heteroskedastic_5d",
    "heteroskedastic_5d_moments",
    "asian_average",
    "asian_payoff",
    "asian_moments",
    "asian_ito_mean",
    "sir_gillespie",
    "sir_trajectory",
    "sir_expected_infected",
    "analytic_reference",
    "analytic_density",
    "oracle_gaussian_reference",
]

ASIAN_STEPS = 1000
ASIAN_DT = 1.0 / ASIAN_STEPS
SIR_POPULATION = 2000
SIR_BETA = 0.5
SIR_GAMMA = 0.5
# runs simulated per block of pre-drawn uniforms
SIR_BLOCK = 500


def stream_seed(master_seed, *keys):
    """``SeedSequence`` for ``(master_seed, *keys)``.

    String keys are reduced to integers with CRC-32.  Distinct key tuples
    yield statistically independent streams.
    """
    ints = tuple(zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in keys)
    return np.random.SeedSequence(int(master_seed), spawn_key=ints)


def stream_rng(master_seed, *keys):
    """Generator drawing from the stream of :func:`stream_seed`."""
    return np.random.default_rng(stream_seed(master_seed, *keys))


def _point(x, dim):
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != dim:
        raise DomainError(f"expected an input of dimension {dim}, got {x.size}")
    return x


def black_scholes_terminal(x, rng, size=1):
    """Draws of ``LN(x1 - x2**2 / 2, x2)``: a stock price after one year."""
    r, v = _point(x, 2)
    return np.exp(r - 0.5 * v * v + v * rng.standard_normal(size))


def heteroskedastic_5d_moments(x):
    """Mean and standard deviation of the five-dimensional Gaussian simulator.

    ``x`` is one point or an array of points with components in ``(0, 1]``.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != 5:
        raise DomainError("expected five inputs")
    if np.any(x <= 0.0) or np.any(x > 1.0):
        raise DomainError("inputs must lie in (0, 1]")
    j = np.arange(1, 6)
    mu = (3.0 - x @ j + (x ** 3) @ j / 5.0 + np.log(x ** 2 + x ** 4) @ j / 15.0
          + x[:, 0] * x[:, 1] ** 2 - x[:, 4] * x[:, 2] + x[:, 1] * x[:, 3])
    sigma = np.exp(x @ j / 10.0)
    if single:
        return float(mu[0]), float(sigma[0])
    return mu, sigma


def heteroskedastic_5d(x, rng, size=1):
    mu, sigma = heteroskedastic_5d_moments(_point(x, 5))
    return mu + sigma * rng.standard_normal(size)


def asian_average(x, rng, size=1):
    """Arithmetic average of a lognormal price path over 1000 daily-like steps."""
    r, v = _point(x, 2)
    out = np.empty(size)
    block = 2000
    for start in range(0, size, block):
        m = min(block, size - start)
        inc = (r - 0.5 * v * v) * ASIAN_DT + v * math.sqrt(ASIAN_DT) * rng.standard_normal((m, ASIAN_STEPS))
        out[start:start + m] = np.exp(np.cumsum(inc, axis=1)).mean(axis=1)
    return out


def asian_payoff(a1, strike=1.0):
    """Call payoff ``max(a1 - strike, 0)``."""
    return np.maximum(np.asarray(a1, dtype=np.float64) - strike, 0.0)


def asian_moments(x):
    """Exact mean and variance of the discrete average ``A_1``."""
    r, v = _point(x, 2)
    t = ASIAN_DT * np.arange(1, ASIAN_STEPS + 1)
    m = np.exp(r * t)
    # Cov(S_j, S_k) = m_j m_k (exp(v^2 min(t_j, t_k)) - 1)
    g = np.expm1(v * v * t)
    # sum_{j,k} m_j m_k g_min(j,k) = sum_k g_k m_k (m_k + 2 sum_{j>k} m_j)
    tail = np.cumsum(m[::-1])[::-1] - m
    var = np.sum(g * m * (m + 2.0 * tail)) / ASIAN_STEPS ** 2
    return float(m.mean()), float(var)


def asian_ito_mean(x):
    """Mean of the continuous-time average, ``(exp(x1) - 1) / x1``."""
    r = _point(x, 2)[0]
    return 1.0 if r == 0 else math.expm1(r) / r


def _sir_state(x):
    s0, i0 = np.rint(_point(x, 2)).astype(np.int64)
    if s0 < 0 or i0 < 0 or s0 + i0 > SIR_POPULATION:
        raise DomainError("initial counts must be non-negative and fit in the population")
    return int(s0), int(i0)


def sir_gillespie(x, rng, size=1):
    """Change ``S_T - S_0`` of susceptible counts over a whole epidemic.

    The output is zero or negative; its magnitude is the number of new
    infections.  Inputs are rounded to integer counts.
    """
    s0, i0 = _sir_state(x)
    width = 2 * (2 * s0 + i0) + 2
    out = np.empty(size, dtype=np.int64)
    for start in range(0, size, SIR_BLOCK):
        m = min(SIR_BLOCK, size - start)
        u = rng.random((m, width))
        delta, _ = _backend.sir_batch(np.full(m, s0), np.full(m, i0), float(SIR_POPULATION),
                                      SIR_BETA, SIR_GAMMA, u)
        out[start:start + m] = delta
    return out


def sir_trajectory(x, rng):
    """One full event history ``(t, S, I, R)`` for auditing; pure Python."""
    s, i = _sir_state(x)
    r = SIR_POPULATION - s - i
    t = 0.0
    hist = [(t, s, i, r)]
    while i > 0:
        rate_inf = SIR_BETA * s * i / SIR_POPULATION
        total = rate_inf + SIR_GAMMA * i
        t += rng.exponential(1.0 / total)
        if rng.random() * total < rate_inf:
            s, i = s - 1, i + 1
        else:
            i, r = i - 1, r + 1
        hist.append((t, s, i, r))
    return np.array(hist)


def sir_expected_infected(s0, i0):
    """Exact expected number of new infections for initial counts ``(s0, i0)``.

    Uses the embedded jump chain: from ``(s, i)`` the next event is an
    infection with probability ``beta s / (beta s + gamma P)``.
    """
    s0, i0 = int(s0), int(i0)
    if i0 == 0 or s0 == 0:
        return 0.0
    n_i = s0 + i0 + 1
    # v[i] = E[S_T | current s, i]; for s = 0 nothing changes
    v = np.zeros(n_i + 1)
    for s in range(1, s0 + 1):
        p = SIR_BETA * s / (SIR_BETA * s + SIR_GAMMA * SIR_POPULATION)
        # V(s, i) = p V(s-1, i+1) + (1-p) V(s, i-1), V(s, 0) = s
        drive = p * v[2:]
        new = np.empty_like(v)
        new[0] = s
        zi = np.array([(1.0 - p) * s])
        new[1:-1], _ = signal.lfilter([1.0], [1.0, -(1.0 - p)], drive, zi=zi)
        new[-1] = new[-2]
        v = new
    return float(s0 - v[i0])


@dataclass(frozen=True)
class SimulatorSpec:
    """A named simulator with its input distribution."""

    identifier: str
    marginals: MarginalSpec
    run: Callable
    description: str
    integer_output: bool = False

    @property
    def dim(self):
        return self.marginals.dim


SIMULATORS = {
    "black-scholes": SimulatorSpec(
        "black-scholes", MarginalSpec([Uniform(0.0, 0.1), Uniform(0.1, 0.4)]),
        black_scholes_terminal, "stock price after one year under geometric Brownian motion"),
    "heteroskedastic-5d": SimulatorSpec(
        "heteroskedastic-5d", MarginalSpec([Uniform(0.0, 1.0)] * 5),
        heteroskedastic_5d, "Gaussian output with nonlinear mean and log-linear standard deviation"),
    "asian": SimulatorSpec(
        "asian", MarginalSpec([Uniform(0.0, 0.1), Uniform(0.1, 0.4)]),
        asian_average, "arithmetic average of a one-year lognormal price path"),
    "sir": SimulatorSpec(
        "sir", MarginalSpec([Uniform(1200.0, 1800.0), Uniform(20.0, 200.0)]),
        sir_gillespie, "change in susceptible count over a stochastic SIR epidemic", True),
}


def get_simulator(identifier):
    try:
        return SIMULATORS[identifier]
    except KeyError:
        raise UnsupportedError(f"unknown simulator {identifier!r}; choose from {sorted(SIMULATORS)}") from None


def analytic_reference(identifier, x):
    """Exact output distribution at ``x`` as a quantile view, when known."""
    if identifier == "black-scholes":
        r, v = _point(x, 2)
        return lognormal_view(r - 0.5 * v * v, v)
    if identifier == "heteroskedastic-5d":
        mu, sigma = heteroskedastic_5d_moments(_point(x, 5))
        return normal_view(mu, sigma)
    raise UnsupportedError(f"no closed-form output distribution for {identifier!r}")


def analytic_density(identifier, x, y):
    """Exact output density at ``x``, evaluated at ``y``, when known."""
    if identifier == "black-scholes":
        r, v = _point(x, 2)
        return stats.lognorm.pdf(y, s=v, scale=math.exp(r - 0.5 * v * v))
    if identifier == "heteroskedastic-5d":
        mu, sigma = heteroskedastic_5d_moments(_point(x, 5))
        return stats.norm.pdf(y, loc=mu, scale=sigma)
    raise UnsupportedError(f"no closed-form output density for {identifier!r}")


def true_moments(identifier, x):
    """Exact mean and variance of the output at ``x``."""
    if identifier == "black-scholes":
        r, v = _point(x, 2)
        return math.exp(r), math.exp(2.0 * r) * math.expm1(v * v)
    if identifier == "heteroskedastic-5d":
        mu, sigma = heteroskedastic_5d_moments(_point(x, 5))
        return mu, sigma * sigma
    if identifier == "asian":
        return asian_moments(x)
    raise UnsupportedError(f"no exact moments for {identifier!r}; estimate them from replications")


def oracle_gaussian_reference(identifier, x):
    """Normal distribution with the exact mean and variance at ``x``."""
    mean, var = true_moments(identifier, x)
    return normal_view(mean, math.sqrt(var))
