import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.special import ndtri
from scipy.stats import rankdata

from semibsl.copula import (
    CorrelationError, clamp_probability, column_ranks, copula_logdensity, grc,
    regularize_correlation, to_quantiles,
)
from semibsl.corestats import KdeModel


def test_ranks_match_scipy_with_ties(gen):
    x = gen.integers(0, 5, size=(40, 3)).astype(float)
    x[:, 2] = gen.standard_normal(40)
    ref = np.column_stack([rankdata(x[:, j]) for j in range(3)])
    assert np.array_equal(column_ranks(x), ref)


def test_grc_self_and_monotone_transform_give_one(gen):
    a = gen.standard_normal(300)
    r = grc(np.column_stack([a, a, np.exp(a), a ** 3]))
    assert np.all(r == 1.0)


def test_grc_independent_columns_near_zero(gen):
    r = grc(gen.standard_normal((5000, 2)))
    assert abs(r[0, 1]) < 0.05


def test_grc_matches_definition(gen):
    x = gen.standard_normal((50, 3))
    n = 50
    z = ndtri(np.column_stack([rankdata(c) for c in x.T]) / (n + 1))
    ref = z.T @ z / np.sum(ndtri(np.arange(1, n + 1) / (n + 1)) ** 2)
    np.fill_diagonal(ref, 1.0)
    assert np.allclose(grc(x), ref, atol=1e-14)


@given(st.integers(0, 2**32), st.sampled_from(
    [np.exp, np.arctan, lambda v: v ** 3 + v, lambda v: -1.0 / (60 - v)]))
def test_grc_invariant_to_monotone_maps(seed, f):
    x = np.random.default_rng(seed).uniform(-50, 50, (25, 3))
    assert np.max(np.abs(grc(f(x)) - grc(x))) <= 1e-12


@given(arrays(float, (12, 4), elements=st.floats(-10, 10)))
def test_grc_unit_diagonal_and_symmetric(x):
    r = grc(x)
    assert np.all(np.diag(r) == 1.0)
    assert np.array_equal(r, r.T)


def test_grc_needs_three_rows():
    with pytest.raises(ValueError):
        grc(np.ones((2, 2)))


@given(arrays(float, 5, elements=st.floats(-5, 5)))
def test_identity_correlation_gives_zero(eta):
    assert copula_logdensity(eta, np.eye(5)) == 0.0


@given(st.floats(-0.95, 0.95))
def test_bivariate_at_origin(rho):
    r = np.array([[1.0, rho], [rho, 1.0]])
    assert math.isclose(copula_logdensity([0.0, 0.0], r), -0.5 * math.log(1 - rho * rho),
                         rel_tol=1e-12, abs_tol=1e-15)


def test_bivariate_hand_value():
    r = np.array([[1.0, 0.5], [0.5, 1.0]])
    rinv = np.array([[1.0, -0.5], [-0.5, 1.0]]) / 0.75
    eta = np.array([1.0, 1.0])
    expect = -0.5 * math.log(0.75) - 0.5 * float(eta @ (rinv - np.eye(2)) @ eta)
    assert math.isclose(expect, 0.4772, abs_tol=5e-5)
    assert math.isclose(copula_logdensity(eta, r), expect, rel_tol=1e-13)


@given(st.permutations(range(4)))
def test_permutation_invariance(perm):
    r = np.array([[1.0, 0.3, -0.2, 0.1], [0.3, 1.0, 0.4, 0.0],
                  [-0.2, 0.4, 1.0, 0.25], [0.1, 0.0, 0.25, 1.0]])
    eta = np.array([0.7, -1.1, 0.2, 2.0])
    p = list(perm)
    assert math.isclose(copula_logdensity(eta[p], r[np.ix_(p, p)]), copula_logdensity(eta, r),
                        rel_tol=1e-12, abs_tol=1e-14)


def test_singular_correlation_raises():
    with pytest.raises(CorrelationError, match="correlation not invertible"):
        copula_logdensity([0.1, 0.2], np.ones((2, 2)))


def test_regularization_repairs_singular_matrix():
    fixed, changed = regularize_correlation(np.ones((3, 3)))
    assert changed
    assert np.all(np.diag(fixed) == 1.0)
    assert np.linalg.eigvalsh(fixed)[0] > 0
    assert math.isfinite(copula_logdensity([0.1, 0.2, 0.3], fixed))


def test_regularization_leaves_good_matrix_alone():
    r = np.array([[1.0, 0.2], [0.2, 1.0]])
    out, changed = regularize_correlation(r)
    assert not changed and out is r


def test_quantile_at_marginal_median_is_zero(gen):
    x = gen.standard_normal((401, 2))
    models = [KdeModel.fit(x[:, j]) for j in range(2)]
    meds = []
    for m in models:
        lo, hi = -5.0, 5.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if m.cdf(mid) < 0.5 else (lo, mid)
        meds.append(0.5 * (lo + hi))
    assert np.allclose(to_quantiles(models, np.array(meds)), 0.0, atol=1e-9)


def test_clamped_quantile():
    m = KdeModel(np.linspace(0, 1, 100), 0.01)
    diag = {}
    eta = to_quantiles([m], np.array([-100.0]), diag)
    assert math.isclose(eta[0], -2.5758, abs_tol=1e-4)
    assert diag["clamped"] == 1
    assert clamp_probability(np.array([0.0, 1.0]), 100).tolist() == [0.005, 0.995]


def test_quantiles_monotone(gen):
    m = KdeModel.fit(gen.standard_normal(100))
    s = np.linspace(-4, 4, 200)[:, None]
    eta = to_quantiles([m], s)[:, 0]
    assert np.all(np.diff(eta) >= 0)
