import numpy as np
import pytest
from scipy import optimize

from glam.errors import DomainError, FeasibilityError
from glam.optim import cmaes_constrained_minimize, trust_region_minimize


def rosen(x):
    return optimize.rosen(x), optimize.rosen_der(x)


def test_trust_region_rosenbrock():
    res = trust_region_minimize(rosen, np.array([-1.2, 1.0, 0.5]))
    assert res.success
    np.testing.assert_allclose(res.x, 1.0, atol=1e-4)


def test_trust_region_rejects_nonfinite_start():
    with pytest.raises(DomainError):
        trust_region_minimize(lambda x: (np.nan, x), np.zeros(2))


def test_trust_region_active_flag():
    res = trust_region_minimize(lambda x: (float(x @ x), 2 * x), np.ones(2), active_check=lambda x: True)
    assert res.active and res.fun < 1e-10


def test_cmaes_sphere_with_linear_constraint():
    # min |x|^2 s.t. x0 >= 1: optimum at (1, 0, 0, 0)
    res = cmaes_constrained_minimize(lambda x: float(x @ x), lambda x: np.array([1.0 - x[0]]),
                                     np.array([3.0, 2.0, -1.0, 0.5]), sigma0=0.5, rng=1)
    np.testing.assert_allclose(res.x, [1.0, 0, 0, 0], atol=1e-4)
    assert res.fun == pytest.approx(1.0, abs=1e-6)


def test_cmaes_history_monotone():
    res = cmaes_constrained_minimize(lambda x: float(np.sum((x - 2) ** 2)), lambda x: x - 1.5,
                                     np.zeros(3), rng=3, max_evals=3000)
    assert np.all(np.diff(res.history) <= 0)
    np.testing.assert_allclose(res.x, 1.5, atol=1e-3)


def test_cmaes_unconstrained_matches_analytic():
    target = np.array([0.3, -1.1])
    res = cmaes_constrained_minimize(lambda x: float(np.sum((x - target) ** 2)), lambda x: np.zeros(1),
                                     np.zeros(2), rng=0)
    np.testing.assert_allclose(res.x, target, atol=1e-5)


def test_cmaes_infeasible_start():
    with pytest.raises(FeasibilityError):
        cmaes_constrained_minimize(lambda x: 0.0, lambda x: np.array([1.0]), np.zeros(2))


def test_cmaes_deterministic():
    args = (lambda x: float(np.sum(np.abs(x))), lambda x: np.array([0.5 - x[1]]), np.ones(2))
    a = cmaes_constrained_minimize(*args, rng=11, max_evals=500)
    b = cmaes_constrained_minimize(*args, rng=11, max_evals=500)
    np.testing.assert_array_equal(a.x, b.x)
