import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from glam import gld
from glam.errors import ConvergenceError, DomainError, NonexistentMomentError, OutsideSupportError

UNIFORM = (0.0, 1.0, 1.0, 1.0)
LOGISTIC = (0.0, 1.0, 0.0, 0.0)

# (lambda, mean, variance) computed with 30-digit mpmath quadrature of Q(u)
MOMENT_ORACLES = [
    ((0.0, 1.0, 0.13, 0.13), 0.0, 2.1731992189266179329),
    ((1.5, 2.0, 0.3, -0.2), 1.74038461538461539, 1.0510795703622094128),
    ((0.0, 1.0, 0.01, 0.02), -0.0097068530382450011668, 3.1256104481724549239),
    ((-1.0, 0.5, -0.3, 0.4), -2.4285714285714285488, 26.885218994735287502),
]

# (lambda, strike, E[max(Y - K, 0)]) from mpmath quadrature
PAYOFF_ORACLES = [
    ((0.0, 1.0, 0.2, 0.1), 0.3, 0.47256469711658894453),
    ((0.5, 2.0, -0.2, 0.3), 1.0, 0.064352466707598722431),
]

shapes = st.floats(-0.45, 2.0)
lambdas = st.tuples(st.floats(-5, 5), st.floats(0.1, 10), shapes, shapes)


def random_lambdas(rng, n, lo=-0.3, hi=2.0):
    return np.column_stack([rng.normal(0, 2, n), np.exp(rng.uniform(np.log(0.1), np.log(10), n)),
                            rng.uniform(lo, hi, n), rng.uniform(lo, hi, n)])


class TestClosedForms:
    def test_uniform_case(self):
        u = np.linspace(0.0, 1.0, 11)
        np.testing.assert_allclose(gld.quantile(u, UNIFORM), 2.0 * u - 1.0, atol=1e-14)
        assert gld.support_bounds(UNIFORM) == (-1.0, 1.0)
        y = np.linspace(-0.99, 0.99, 7)
        np.testing.assert_allclose(gld.pdf(y, UNIFORM), 0.5, atol=1e-12)
        np.testing.assert_allclose(gld.cdf(y, UNIFORM), (y + 1) / 2, atol=1e-12)
        mean, var = gld.mean_variance(UNIFORM)
        assert mean == pytest.approx(0.0, abs=1e-14)
        assert var == pytest.approx(1.0 / 3.0, abs=1e-14)

    def test_logistic_limit(self):
        u = np.array([0.1, 0.5, 0.9])
        np.testing.assert_allclose(gld.quantile(u, LOGISTIC), np.log(u / (1 - u)), atol=1e-14)
        y = np.array([-3.0, 0.0, 2.0])
        np.testing.assert_allclose(gld.pdf(y, LOGISTIC), special.expit(y) * special.expit(-y), rtol=1e-12)
        assert gld.mean_variance(LOGISTIC) == pytest.approx((0.0, math.pi ** 2 / 3), abs=1e-12)
        assert gld.support_bounds(LOGISTIC) == (-math.inf, math.inf)

    @pytest.mark.parametrize("lam,mean,var", MOMENT_ORACLES)
    def test_moment_oracles(self, lam, mean, var):
        m, v = gld.mean_variance(lam)
        assert m == pytest.approx(mean, rel=1e-12, abs=1e-14)
        assert v == pytest.approx(var, rel=1e-12)

    def test_moments_continuous_through_zero_shape(self):
        # one-sided difference quotients settle on the derivative at zero
        _, v0 = gld.mean_variance(LOGISTIC)
        slopes = [(gld.mean_variance((0.0, 1.0, e, e))[1] - v0) / e for e in (1e-7, 1e-6, 1e-5)]
        assert max(slopes) - min(slopes) < 1e-3 * abs(slopes[0])

    @pytest.mark.parametrize("lam,strike,value", PAYOFF_ORACLES)
    def test_payoff_oracles(self, lam, strike, value):
        assert gld.expected_payoff(lam, strike) == pytest.approx(value, rel=1e-10)

    def test_payoff_limits(self):
        lam = (0.0, 1.0, 0.2, 0.1)
        lo, hi = gld.support_bounds(lam)
        assert gld.expected_payoff(lam, hi + 1.0) == 0.0
        mean, _ = gld.mean_variance(lam)
        assert gld.expected_payoff(lam, lo - 2.0) == pytest.approx(mean - lo + 2.0, rel=1e-12)

    def test_payoff_matches_quadrature(self):
        lam = (0.3, 1.7, -0.1, 0.25)
        for k in (-1.0, 0.3, 1.2):
            ref, _ = integrate.quad(lambda u: max(gld.quantile(u, lam) - k, 0.0), 0, 1, limit=200, points=[0.5])
            assert gld.expected_payoff(lam, k) == pytest.approx(ref, rel=1e-7)


class TestProperties:
    @given(lambdas, st.floats(1e-6, 1 - 1e-6), st.floats(1e-6, 1 - 1e-6))
    def test_quantile_monotone(self, lam, u1, u2):
        if u1 == u2:
            return
        u1, u2 = sorted((u1, u2))
        assume_gap = gld.quantile(u2, lam) - gld.quantile(u1, lam)
        assert assume_gap >= 0
        if u2 - u1 > 1e-9:
            assert assume_gap > 0

    @given(lambdas, st.floats(0.001, 0.999))
    def test_round_trip(self, lam, u):
        y = float(gld.quantile(u, lam))
        lo, hi = gld.support_bounds(lam)
        if not lo < y < hi:
            return
        back = gld.quantile(gld.invert_quantile(y, lam), lam)
        assert abs(back - y) <= 1e-10 * max(1.0, abs(y))

    @given(st.tuples(st.floats(-5, 5), st.floats(0.1, 10), shapes), st.floats(1e-4, 0.5))
    def test_symmetry(self, lam3, u):
        l1, l2, s = lam3
        lam = (l1, l2, s, s)
        assert gld.quantile(u, lam) + gld.quantile(1 - u, lam) == pytest.approx(2 * l1, abs=1e-9 * (1 + abs(l1)) + 1e-9 * abs(gld.quantile(u, lam)))

    @settings(deadline=None)
    @given(lambdas, st.floats(0.01, 0.99))
    def test_cdf_inverts_quantile(self, lam, u):
        y = gld.quantile(u, lam)
        assert gld.cdf(y, lam) == pytest.approx(u, abs=1e-9)

    def test_pdf_is_reciprocal_quantile_density(self, rng):
        lam = random_lambdas(rng, 50)
        u = rng.uniform(0.01, 0.99, 50)
        y = gld.quantile(u, lam)
        np.testing.assert_allclose(gld.pdf(y, lam), 1.0 / gld.quantile_density(u, lam), rtol=1e-8)

    def test_pdf_integrates_to_one(self, rng):
        for lam in random_lambdas(rng, 40):
            # y-space quadrature with the substitution y = Q(u) split at the median
            lo, hi = gld.quantile([1e-12, 1 - 1e-12], lam)
            med = gld.quantile(0.5, lam)
            total = sum(integrate.quad(lambda y: float(gld.pdf(y, lam)), a, b, limit=400)[0]
                        for a, b in ((lo, med), (med, hi)))
            assert total == pytest.approx(1.0, abs=1e-4)

    def test_moments_against_sampling(self, rng):
        for lam in random_lambdas(rng, 20, lo=-0.2, hi=2.0):
            draws = gld.sample(lam, 200_000, rng)
            mean, var = gld.mean_variance(lam)
            se = math.sqrt(var / draws.size)
            assert abs(draws.mean() - mean) < 5 * se

    def test_sample_is_finite_for_heavy_tails(self, rng):
        draws = gld.sample((0.0, 1.0, -0.8, -0.8), 10_000, rng)
        assert np.all(np.isfinite(draws))


class TestPartials:
    @pytest.mark.parametrize("lam", [(0.2, 1.3, 0.4, -0.2), (1.0, 0.5, 1.5, 0.7), (0.0, 1.0, 1e-9, -1e-9),
                                     (0.0, 2.0, 0.0, 0.3)])
    def test_partials_vs_finite_differences(self, lam):
        u = np.array([0.01, 0.3, 0.5, 0.8, 0.99])
        got = gld.quantile_partials(u, lam)
        h = 1e-6
        fd = [(gld.quantile(u + h, lam) - gld.quantile(u - h, lam)) / (2 * h)]
        for k in range(4):
            e = np.zeros(4)
            e[k] = h
            fd.append((gld.quantile(u, np.add(lam, e)) - gld.quantile(u, np.subtract(lam, e))) / (2 * h))
        fd = np.stack(fd, axis=-1)
        near_zero = min(abs(lam[2]), abs(lam[3])) < 1e-3
        np.testing.assert_allclose(got, fd, rtol=1e-3 if near_zero else 1e-5, atol=1e-7)


class TestErrors:
    def test_invalid_lambda(self):
        with pytest.raises(DomainError):
            gld.quantile(0.5, (0, -1, 0.1, 0.1))
        with pytest.raises(DomainError):
            gld.quantile(0.5, (0, 1, 0.1))
        with pytest.raises(DomainError):
            gld.quantile(1.5, UNIFORM)

    def test_outside_support(self):
        with pytest.raises(OutsideSupportError):
            gld.invert_quantile(2.0, UNIFORM)
        assert gld.pdf(2.0, UNIFORM) == 0.0
        assert gld.cdf(2.0, UNIFORM) == 1.0 and gld.cdf(-2.0, UNIFORM) == 0.0

    def test_support_endpoints(self):
        assert gld.invert_quantile(-1.0, UNIFORM) == 0.0
        assert gld.invert_quantile(1.0, UNIFORM) == 1.0

    def test_nonexistent_variance(self):
        with pytest.raises(NonexistentMomentError):
            gld.mean_variance((0, 1, -0.5, 0.1))
        with pytest.raises(NonexistentMomentError):
            gld.expected_payoff((0, 1, 0.1, -1.0), 0.0)

    def test_bad_tolerance(self):
        with pytest.raises(DomainError):
            gld.invert_quantile(0.0, UNIFORM, tol=0)

    def test_convergence_error_type(self):
        assert issubclass(ConvergenceError, RuntimeError)
