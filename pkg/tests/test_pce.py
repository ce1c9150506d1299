import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from glam.errors import DomainError, UnsupportedError
from glam.pce import (Gaussian, MarginalSpec, PceFunction, TruncationSet, Uniform, design_matrix,
                      enumerate_truncation, from_standard, pce_eval, to_standard, univariate_eval,
                      univariate_table)


def gauss_rule(family, n=40):
    if family == "uniform":
        x, w = np.polynomial.legendre.leggauss(n)
        return x, w / 2.0
    x, w = np.polynomial.hermite_e.hermegauss(n)
    return x, w / math.sqrt(2.0 * math.pi)


@pytest.mark.parametrize("family", ["uniform", "gaussian"])
def test_orthonormality(family):
    x, w = gauss_rule(family)
    table = univariate_table(family, 10, x)
    gram = table.T @ (w[:, None] * table)
    np.testing.assert_allclose(gram, np.eye(11), atol=1e-10)


@pytest.mark.parametrize("family,k,x,expected", [
    ("uniform", 1, 0.5, math.sqrt(3) * 0.5),
    ("uniform", 2, 0.5, math.sqrt(5) * (3 * 0.25 - 1) / 2),
    ("gaussian", 2, 2.0, (4.0 - 1.0) / math.sqrt(2)),
    ("gaussian", 3, 1.0, (1.0 - 3.0) / math.sqrt(6)),
])
def test_known_values(family, k, x, expected):
    assert univariate_eval(family, k, x) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("p,q,dim,count", [
    (0, 1.0, 3, 1), (3, 1.0, 2, 10), (5, 1.0, 5, 252), (2, 0.5, 2, 5), (4, 0.5, 2, 10), (1, 0.7, 4, 5),
])
def test_truncation_cardinality(p, q, dim, count):
    assert len(enumerate_truncation(p, q, dim)) == count


def test_graded_lexicographic_order():
    t = enumerate_truncation(2, 1.0, 2)
    assert t.as_tuples() == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


@given(st.integers(0, 6), st.sampled_from([0.4, 0.5, 0.7, 0.9, 1.0]), st.sampled_from([0.4, 0.6, 1.0]),
       st.integers(1, 4))
def test_nesting(p, q1, q2, dim):
    qa, qb = sorted((q1, q2))
    small = enumerate_truncation(p, qa, dim)
    assert small.issubset(enumerate_truncation(p, qb, dim))
    assert small.issubset(enumerate_truncation(p + 1, qa, dim))


def test_truncation_validation():
    with pytest.raises(DomainError):
        TruncationSet(np.array([[0, 0], [0, 0]]))
    with pytest.raises(DomainError):
        enumerate_truncation(2, 1.5, 2)
    with pytest.raises(UnsupportedError):
        univariate_table("uniform", 31, 0.0)


def test_affine_round_trip(rng):
    spec = MarginalSpec([Uniform(-2.0, 5.0), Gaussian(1.0, 3.0)])
    x = np.column_stack([rng.uniform(-2, 5, 100), rng.normal(1, 3, 100)])
    np.testing.assert_allclose(from_standard(spec, to_standard(spec, x)), x, atol=1e-14, rtol=1e-14)
    assert to_standard(spec, np.array([5.0, 1.0])).tolist() == [1.0, 0.0]


def test_outside_uniform_bounds():
    spec = MarginalSpec([Uniform(0.0, 1.0)])
    with pytest.raises(DomainError):
        to_standard(spec, np.array([[1.5]]))


def test_unsupported_marginal():
    with pytest.raises(UnsupportedError):
        MarginalSpec(["beta"])


def test_pce_linear_in_coefficients(rng):
    spec = MarginalSpec([Uniform(0, 1), Uniform(0, 1)])
    t = enumerate_truncation(3, 1.0, 2)
    x = rng.random((20, 2))
    a, b = rng.normal(size=len(t)), rng.normal(size=len(t))
    fa, fb = PceFunction(t, a, spec), PceFunction(t, b, spec)
    fab = PceFunction(t, 2.0 * a - 3.0 * b, spec)
    np.testing.assert_allclose(pce_eval(fab, x), 2.0 * pce_eval(fa, x) - 3.0 * pce_eval(fb, x), atol=1e-12)


def test_design_matrix_reproduces_polynomial():
    # f(x) = x1 * x2 on [-1, 1]^2 is psi_(1,1) / 3
    spec = MarginalSpec([Uniform(-1, 1), Uniform(-1, 1)])
    t = enumerate_truncation(2, 1.0, 2)
    x = np.array([[0.3, -0.7], [1.0, 1.0]])
    psi = design_matrix(spec, t, x)
    col = t.as_tuples().index((1, 1))
    np.testing.assert_allclose(psi[:, col] / 3.0, x[:, 0] * x[:, 1], atol=1e-15)
    assert pce_eval(PceFunction(t, np.eye(len(t))[col] / 3.0, spec), x[0]) == pytest.approx(-0.21)


def test_serialization_round_trip():
    t = enumerate_truncation(3, 0.7, 3)
    assert TruncationSet.from_dict(t.to_dict()) == t
    spec = MarginalSpec([Uniform(0, 1), Gaussian(0, 2)])
    assert MarginalSpec.from_dict(spec.to_dict()) == spec
