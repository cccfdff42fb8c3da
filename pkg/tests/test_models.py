import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from semibsl.corestats import DegenerateSampleError, mvn_logpdf
from semibsl.models import (
    MA2Model, MG1Model, MODELS, ParameterError, SinhArcsinhDistortion, StableParams, SVMModel,
    ToadsModel, make_model, ma2_covariance, ma2_simulate, ma2_true_loglik, mg1_simulate,
    sinh_arcsinh, sinh_arcsinh_pdf, stable_sample, svm_simulate, toads_simulate, toads_summarize,
)
from semibsl.rng import SeedTree


def autocov(x, lag):
    x = x - x.mean()
    return float(np.mean(x[lag:] * x[:len(x) - lag]))


def stable_cdf(x, alpha, beta, kappa=1.0, eta=0.0):
    """Gil-Pelaez inversion of the 1-parameterisation characteristic function."""
    def integrand(t):
        w = math.tan(0.5 * math.pi * alpha)
        logphi = -(kappa * t) ** alpha * complex(1.0, -beta * w) + 1j * eta * t
        return (np.exp(logphi - 1j * t * x)).imag / t
    val, _ = integrate.quad(integrand, 0, np.inf, limit=500)
    return 0.5 - val / math.pi


# --- sinh-arcsinh


def test_identity_distortion():
    y = np.linspace(-3, 3, 13)
    assert np.allclose(sinh_arcsinh(y, 0.0, 1.0), y, atol=1e-15)


@given(st.floats(0.05, 5))
def test_zero_maps_to_zero(delta):
    assert sinh_arcsinh(0.0, 0.0, delta) == 0.0


def test_calculator_value():
    assert abs(sinh_arcsinh(1.0, 1.0, 2.0) - 1.0857) < 5e-5


@given(st.floats(-3, 3), st.floats(0.1, 3), st.floats(-5, 5))
def test_distortion_inverse(eps, delta, y):
    d = SinhArcsinhDistortion(eps, delta)
    s = d(y)
    if abs(s) > 1e12:
        return
    assert math.isclose(float(d.inverse(s)), y, rel_tol=1e-8, abs_tol=1e-8)


def test_distortion_rejects_nonpositive_delta():
    with pytest.raises(ValueError):
        SinhArcsinhDistortion(0.0, 0.0)


@pytest.mark.parametrize("eps, delta", [(1.3, 0.6), (0.0, 0.35), (5.0, 1.0), (0.0, 0.1), (5.0, 0.4)])
def test_sinh_arcsinh_pdf_against_histogram(eps, delta, tree):
    y = tree.generator().standard_normal(10**6)
    s = sinh_arcsinh(y, eps, delta)
    lo, hi = np.quantile(s, [0.02, 0.98])
    edges = np.linspace(lo, hi, 41)
    counts, _ = np.histogram(s, edges)
    expected = np.array([integrate.quad(lambda v: sinh_arcsinh_pdf(v, eps, delta), a, b)[0]
                         for a, b in zip(edges[:-1], edges[1:])]) * s.size
    assert np.all(np.abs(counts - expected) <= 4 * np.sqrt(expected) + 1)


# --- MA(2)


def test_ma2_white_noise_variance(gen):
    x = ma2_simulate((0.0, 0.0), 10000, 1.0, gen)
    assert abs(x.var() - 1.0) < 0.05


def test_ma2_autocovariances(gen):
    x = ma2_simulate((0.6, 0.2), 100000, 1.0, gen)
    assert abs(autocov(x, 0) - 1.40) < 0.03
    assert abs(autocov(x, 1) - (0.6 + 0.12)) < 0.02
    assert abs(autocov(x, 2) - 0.2) < 0.02
    assert abs(autocov(x, 3)) < 4 * math.sqrt(1.4 ** 2 / 100000) * 3


def test_ma2_rejects_noninvertible(gen):
    with pytest.raises(ParameterError):
        ma2_simulate((0.5, 1.2), 50, 1.0, gen)
    with pytest.raises(ParameterError):
        ma2_simulate((-1.0, -0.5), 50, 1.0, gen)


def test_ma2_white_noise_loglik(gen):
    y = gen.standard_normal(30)
    assert abs(ma2_true_loglik(y, (0.0, 0.0)) - stats.norm.logpdf(y).sum()) < 1e-12


def test_ma2_loglik_dense_oracle(gen):
    y = gen.standard_normal(5)
    t1, t2 = 0.6, 0.2
    cov = np.zeros((5, 5))
    for i in range(5):
        for j in range(5):
            cov[i, j] = {0: 1 + t1 ** 2 + t2 ** 2, 1: t1 + t1 * t2, 2: t2}.get(abs(i - j), 0.0)
    ref = -0.5 * (y @ np.linalg.inv(cov) @ y) - 0.5 * math.log(np.linalg.det(cov)) - 2.5 * math.log(2 * math.pi)
    assert abs(ma2_true_loglik(y, (t1, t2)) - ref) < 1e-10


def test_ma2_covariance_is_pentadiagonal():
    cov = ma2_covariance((0.6, 0.2), 8)
    i, j = np.indices(cov.shape)
    assert np.all(cov[np.abs(i - j) > 2] == 0.0)


def test_ma2_exact_loglik_change_of_variables(gen):
    m = MA2Model(T0=6, eps=0.7, delta=0.5)
    s = m.simulate_summaries((0.6, 0.2), 1, gen)[0]
    y = m.distortion.inverse(s)
    e = 1e-6
    dy = (m.distortion.inverse(s + e) - m.distortion.inverse(s - e)) / (2 * e)
    ref = mvn_logpdf(y, np.zeros(6), ma2_covariance((0.6, 0.2), 6)) + np.log(np.abs(dy)).sum()
    assert abs(m.exact_loglik(s, (0.6, 0.2)) - ref) < 1e-6


def test_ma2_batch_shape(gen):
    assert ma2_simulate((0.6, 0.2), 50, 1.0, gen, n=7).shape == (7, 50)


# --- stable


def test_stable_alpha_two_is_gaussian(gen):
    x = stable_sample(StableParams(2.0, 0.7), gen, 10**5)
    assert abs(x.var() - 2.0) < 0.05


def test_stable_symmetric_median(gen):
    x = stable_sample(StableParams(1.3, 0.0, 1.0, 0.4), gen, 10**5)
    assert abs(np.median(x) - 0.4) < 0.02


def test_stable_symmetric_quantiles_mirror(gen):
    x = stable_sample(StableParams(1.5, 0.0), gen, 10**5)
    q = np.quantile(x, [0.1, 0.25, 0.75, 0.9])
    assert abs(q[0] + q[3]) < 0.05 and abs(q[1] + q[2]) < 0.03


@pytest.mark.parametrize("beta", [0.0, 0.5])
def test_stable_quartiles_match_characteristic_function(beta, tree):
    x = stable_sample(StableParams(1.7, beta), tree.generator(), 10**5)
    for p in (0.25, 0.75):
        q = np.quantile(x, p)
        assert abs(stable_cdf(q, 1.7, beta) - p) < 0.005
    # a quantile error of 0.02 corresponds to about 0.005 in probability here


def test_stable_alpha_one_branch(gen):
    x = stable_sample(StableParams(1.0, 0.0), gen, 10**5)
    # symmetric alpha = 1 is Cauchy with scale kappa
    assert abs(np.quantile(x, 0.75) - 1.0) < 0.03


def test_stable_params_validated():
    for bad in ((0.0, 0.0), (2.1, 0.0), (1.5, 1.5)):
        with pytest.raises(ValueError):
            StableParams(*bad)


# --- M/G/1


def test_mg1_lower_bound(gen):
    x = mg1_simulate((1.0, 5.0, 0.2), 51, gen, n=2000)
    assert x.size == 10**5 and np.all(x >= 1.0)


def test_mg1_saturated_queue_is_uniform(gen):
    x = mg1_simulate((1.0, 5.0, 1e6), 10001, gen)
    stat = stats.kstest(x, stats.uniform(1.0, 4.0).cdf).statistic
    assert stat < 1.63 / math.sqrt(x.size)


def test_mg1_shape(gen):
    x = MG1Model().simulate((1.0, 5.0, 0.2), None, gen)
    assert x.shape == (50,) and np.all(np.isfinite(x)) and np.all(x > 0)


def test_mg1_rejects_bad_theta(gen):
    with pytest.raises(ParameterError):
        mg1_simulate((5.0, 1.0, 0.2), 51, gen)


# --- toads


def test_toads_always_return(gen):
    x = toads_simulate((1.7, 35.0, 1.0), gen=gen)
    assert np.all(x == 0.0)
    with pytest.raises(DegenerateSampleError, match="insufficient displacements"):
        toads_summarize(x)


def test_toads_random_walk_increments(gen):
    x = toads_simulate((1.7, 35.0, 0.0), gen=gen)
    inc = np.diff(x, axis=0)
    assert np.all(inc != 0)
    assert abs(np.median(inc)) < 0.1 * 35


def test_toads_shapes(gen):
    x = toads_simulate((1.7, 35.0, 0.6), gen=gen)
    assert x.shape == (63, 66) and np.all(np.isfinite(x))
    s = toads_summarize(x)
    assert s.shape == (48,) and np.all(np.isfinite(s))
    batch = ToadsModel().simulate_summaries((1.7, 35.0, 0.6), 3, gen)
    assert batch.shape == (3, 48)


def test_toads_summary_counts_and_quantiles(gen):
    x = toads_simulate((1.7, 35.0, 0.6), gen=gen)
    s = toads_summarize(x)
    disp = np.abs(x[1:] - x[:-1]).ravel()
    large = disp[disp >= 10]
    assert s[0] == np.sum(disp < 10)
    q = np.quantile(large, np.linspace(0, 1, 11))
    assert np.allclose(s[1:11], np.log(np.diff(q)), rtol=1e-12)
    assert math.isclose(s[11], np.median(large), rel_tol=1e-12)


@given(st.permutations(range(66)))
def test_toads_summary_column_order_invariant(perm):
    x = toads_simulate((1.7, 35.0, 0.6), gen=SeedTree(3).generator())
    assert np.allclose(toads_summarize(x[:, list(perm)]), toads_summarize(x), rtol=1e-12, atol=1e-12)


def test_toads_return_lands_on_own_history(gen):
    x = toads_simulate((1.7, 35.0, 0.6), gen=gen)
    revisits = sum(x[t, k] in x[:t, k] for k in range(66) for t in range(1, 63))
    # every non-return draws a fresh continuous site, so revisits are returns
    expected = 0.6 * 62 * 66
    assert abs(revisits - expected) < 5 * math.sqrt(expected * 0.4)


# --- SVM


def test_svm_gaussian_shocks(gen):
    y = svm_simulate((2.0, 0.0), gen=gen)
    assert y.shape == (50,) and math.isfinite(np.var(np.log(np.abs(y))))


def test_svm_heavy_tails():
    kurt = [stats.kurtosis(svm_simulate((1.2, 0.5), gen=SeedTree(700, (r,)).generator()), fisher=False)
            for r in range(100)]
    assert np.median(kurt) > 10


def test_svm_seed_contract():
    a = svm_simulate((0.7, 0.5), gen=SeedTree(1).generator())
    b = svm_simulate((0.7, 0.5), gen=SeedTree(1).generator())
    c = svm_simulate((0.7, 0.5), gen=SeedTree(2).generator())
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_svm_log_vol_cap_reported(gen):
    diag = {}
    y = svm_simulate((1.5, 0.0), {"sigma": 50.0}, 200, gen, diagnostics=diag)
    assert np.all(np.isfinite(y)) and diag["log_vol_capped"] > 0


def test_registry():
    assert set(MODELS) == {"ma2", "mg1", "toads", "svm"}
    assert isinstance(make_model("svm", T0=20), SVMModel)
    with pytest.raises(ValueError):
        make_model("ar1")
