import warnings

import numpy as np
import pytest

from glam import gld
from glam.errors import DegenerateDataError
from glam.fit import FitConfig, fgls, fit, modified_fgls
from glam.model import Dataset, GlamModel
from glam.pce import MarginalSpec, TruncationSet, Uniform, enumerate_truncation

SPEC = MarginalSpec([Uniform(0, 1), Uniform(0, 1)])
LIN = enumerate_truncation(1, 1.0, 2)


def hetero(rng, n):
    # mean x1 and log-variance x2
    X = rng.random((n, 2))
    y = X[:, 0] + np.exp(0.5 * X[:, 1]) * rng.normal(size=n)
    return X, y


def test_fgls_recovers_linear_mean_and_log_variance(rng):
    X, y = hetero(rng, 20_000)
    c_mu, c_v = fgls(SPEC, X, y, LIN, LIN)
    # psi_1 = sqrt(3) (2 x - 1); x1 = 0.5 + psi_(1,0) / (2 sqrt 3)
    np.testing.assert_allclose(c_mu, [0.5, 1 / (2 * np.sqrt(3)), 0.0], atol=0.03)
    # log squared Gaussian residual has mean log v + E[log chi2_1] = log v - 1.2704
    np.testing.assert_allclose(c_v[1:], [0.0, 1 / (2 * np.sqrt(3))], atol=0.05)
    assert c_v[0] == pytest.approx(0.5 - 1.2704, abs=0.05)


def test_fgls_without_iterations_is_ols(rng):
    X, y = hetero(rng, 100)
    c_mu, c_v = fgls(SPEC, X, y, LIN, LIN, n_iter=0)
    assert c_v is None
    psi = np.column_stack([np.ones(100), np.sqrt(3) * (2 * X[:, 0] - 1), np.sqrt(3) * (2 * X[:, 1] - 1)])
    np.testing.assert_allclose(c_mu, np.linalg.lstsq(psi, y, rcond=None)[0], rtol=1e-10)


def test_modified_fgls_picks_lowest_variance_loo(rng):
    X, y = hetero(rng, 500)
    tm, c_mu, tv, c_v, info = modified_fgls(SPEC, X, y, range(4), [1.0], range(3), [1.0], n_iter=5)
    assert len(info["var_loo"]) == 5
    assert info["var_loo"][info["best_iteration"]] == min(info["var_loo"])
    assert len(c_mu) == len(tm) and len(c_v) == len(tv)


def test_modified_fgls_constant_mean():
    rng = np.random.default_rng(1)
    X = rng.random((200, 2))
    y = 3.0 + 1e-3 * rng.normal(size=200)
    tm, c_mu, *_ = modified_fgls(SPEC, X, y, range(4), [1.0], range(2), [1.0], n_iter=2)
    assert tm.p == 0
    assert c_mu[0] == pytest.approx(3.0, abs=1e-3)


def test_degenerate_data():
    with pytest.raises(DegenerateDataError):
        fit(Dataset(np.random.default_rng(0).random((30, 2)), np.ones(30)), SPEC)


def constant_truth_config(**kw):
    const = TruncationSet.constant(2)
    return FitConfig(mean_truncation=const, var_truncation=const, shape_degree=0, **kw)


def test_constant_lambda_recovery():
    lam = np.array([1.0, 2.0, 0.1, 0.25])
    rng = np.random.default_rng(5)
    X = rng.random((4000, 2))
    data = Dataset(X, gld.quantile(rng.random(4000), lam))
    model = fit(data, SPEC, constant_truth_config())
    got = model.lambdas(X[:1])[0]
    np.testing.assert_allclose(got, lam, atol=0.05)


def test_likelihood_never_increases(rng):
    X, y = hetero(rng, 400)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = fit(Dataset(X, y), SPEC, FitConfig(mean_degrees=range(3), var_degrees=range(2)))
    md = model.metadata
    assert md["nll_final"] <= md["nll_round1"] + 1e-9
    assert md["nll_round1"] <= md["nll_start"] + 1e-9
    assert model.shape_floor == -0.3
    assert len(model.lambda3.truncation) == 3


def test_fit_is_deterministic(rng):
    X, y = hetero(rng, 200)
    cfg = FitConfig(mean_degrees=range(3), var_degrees=range(2))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        a = fit(Dataset(X, y), SPEC, cfg)
        b = fit(Dataset(X, y), SPEC, cfg)
    np.testing.assert_array_equal(a.coefficients, b.coefficients)


def test_finite_difference_gradient_mode():
    lam = np.array([0.0, 1.0, 0.2, 0.2])
    rng = np.random.default_rng(2)
    X = rng.random((500, 2))
    data = Dataset(X, gld.quantile(rng.random(500), lam))
    a = fit(data, SPEC, constant_truth_config())
    b = fit(data, SPEC, constant_truth_config(gradient="finite-difference"))
    np.testing.assert_allclose(a.coefficients, b.coefficients, atol=1e-3)


def test_fit_with_replications():
    rng = np.random.default_rng(4)
    X = rng.random((40, 2))
    reps = np.full(40, 10)
    y = np.repeat(X[:, 0], 10) + 0.2 * rng.normal(size=400)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = fit(Dataset(X, y, reps), SPEC, FitConfig(mean_degrees=range(3), var_degrees=range(2)))
    assert isinstance(model, GlamModel)
    mean, var = model.mean_variance(X)
    assert np.max(np.abs(mean - X[:, 0])) < 0.1
    assert model.metadata["n_observations"] == 400
