import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats
from scipy.special import ndtr

from semibsl import metrics
from semibsl.corestats import DegenerateSampleError
from semibsl.marginals import MarginalSpec
from semibsl.mcmc import DEFAULT_PRIORS, ChainConfig, run_chain
from semibsl.metrics import (
    GaussianMixtureDensity, Grid, GridDensity, SinhArcsinhDensity, BENCHMARK_DENSITIES, effective_sample_size,
    parse_density, posterior_tv, density_benchmark, benchmark_estimators, tv_distance,
)
from semibsl.models import MA2Model
from semibsl.rng import SeedTree
from semibsl.synlik import EstimatorConfig
from semibsl.tkde import Variant


def gaussian_on(grid, mu):
    return GridDensity.build(grid, stats.norm.pdf(grid.nodes, mu))


def test_gaussian_shift_value():
    grid = Grid.uniform(-8, 9, 4096)
    tv = tv_distance(gaussian_on(grid, 0.0), gaussian_on(grid, 1.0))
    assert abs(tv - (2 * ndtr(0.5) - 1)) < 1e-3
    assert abs(tv - 0.3829) < 1e-3


def test_identical_and_disjoint():
    grid = Grid.uniform(0, 10, 1001)
    x = grid.nodes
    left = GridDensity.build(grid, (x < 4).astype(float))
    right = GridDensity.build(grid, (x > 6).astype(float))
    assert tv_distance(left, left) == 0.0
    assert tv_distance(left, right) == 1.0


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_tv_symmetric_and_bounded(a, b):
    grid = Grid.uniform(-12, 12, 801)
    f, g = gaussian_on(grid, a), gaussian_on(grid, b)
    t1, t2 = tv_distance(f, g), tv_distance(g, f)
    assert t1 == t2 and 0.0 <= t1 <= 1.0
    assert (t1 == 0.0) == np.array_equal(f.values, g.values)


def test_mismatched_grids_rejected():
    with pytest.raises(ValueError, match="different grids"):
        tv_distance(gaussian_on(Grid.uniform(-5, 5, 100), 0), gaussian_on(Grid.uniform(-5, 5, 101), 0))


def test_grid_density_normalized_and_mass_reported():
    grid = Grid.uniform(0, 3, 2001)
    d = GridDensity.build(grid, stats.norm.pdf(grid.nodes))
    assert abs(d.integral() - 1) < 1e-3
    assert abs(d.mass - (ndtr(3) - 0.5)) < 1e-6


def test_grid_density_rejects_bad_values():
    grid = Grid.uniform(0, 1, 5)
    with pytest.raises(ValueError):
        GridDensity.build(grid, -np.ones(5))
    with pytest.raises(ValueError):
        GridDensity.build(grid, np.zeros(5))


@pytest.mark.parametrize("dens", BENCHMARK_DENSITIES, ids=lambda d: d.name)
def test_reference_grids_hold_the_mass(dens):
    g = dens.grid()
    mass = GridDensity.build(g, dens.pdf(g.nodes), renormalize=False).mass
    assert abs(mass - 1) < 1e-6


def test_sas_pdf_matches_histogram(tree):
    dens = SinhArcsinhDensity(1.3, 0.6)
    s = dens.sample(tree.generator(), 10**6)
    edges = np.linspace(*np.quantile(s, [0.01, 0.99]), 51)
    counts, _ = np.histogram(s, edges)
    mids = 0.5 * (edges[1:] + edges[:-1])
    from scipy.integrate import quad
    expected = np.array([quad(dens.pdf, a, b)[0] for a, b in zip(edges[:-1], edges[1:])]) * s.size
    assert np.all(np.abs(counts - expected) <= 4 * np.sqrt(expected) + 1), mids


def test_mixture_sampler(tree):
    x = GaussianMixtureDensity().sample(tree.generator(), 200000)
    assert abs(x.mean() - 5.5) < 0.02
    assert abs(x.var() - (1 + 6.25)) < 0.05


def test_parse_density():
    assert parse_density("bimodal") == GaussianMixtureDensity()
    d = parse_density("sas:5,0.4:tkde1")
    assert (d.eps, d.delta, d.variant) == (5.0, 0.4, Variant.POSITIVE_SKEW)
    with pytest.raises(ValueError):
        parse_density("gamma:2")


def test_benchmark_deterministic_and_worker_independent():
    dens = SinhArcsinhDensity(1.3, 0.6)
    kde, tkde = benchmark_estimators(dens)
    a = density_benchmark(dens, 100, 12, tkde, SeedTree(5), workers=1)
    b = density_benchmark(dens, 100, 12, tkde, SeedTree(5), workers=3)
    assert a == b
    assert a.failures == 0 and a.replicates == 12


def test_benchmark_kde_cell_near_reference_value():
    dens = SinhArcsinhDensity(1.3, 0.6)
    kde, _ = benchmark_estimators(dens)
    r = density_benchmark(dens, 1000, 40, kde, SeedTree(6))
    assert abs(r.mean - 0.116) < 0.01
    assert abs(r.std - 0.010) < 0.006


def test_benchmark_counts_failures(monkeypatch):
    dens = SinhArcsinhDensity(0.0, 1.0)
    real = metrics.fit_marginal
    calls = {"k": 0}

    def flaky(x, s_obs, spec, warm=None):
        calls["k"] += 1
        if calls["k"] % 3 == 0:
            raise DegenerateSampleError("forced")
        return real(x, s_obs, spec, warm)

    monkeypatch.setattr(metrics, "fit_marginal", flaky)
    r = density_benchmark(dens, 100, 9, MarginalSpec(), SeedTree(1))
    assert r.failures == 3 and math.isfinite(r.mean)


def test_windowed_benchmark_reports_mass():
    dens = SinhArcsinhDensity(0.0, 0.1)
    grid = Grid.uniform(-50, 50, 8192)
    r = density_benchmark(dens, 100, 5, MarginalSpec(), SeedTree(2), grid=grid, renormalize=False)
    assert 0 < r.reference_mass < 1


def test_ess_of_independent_and_correlated(tree):
    g = tree.generator()
    iid = g.standard_normal(20000)
    assert abs(effective_sample_size(iid) / 20000 - 1) < 0.1
    ar = np.empty(20000)
    ar[0] = 0
    e = g.standard_normal(20000)
    for t in range(1, 20000):
        ar[t] = 0.9 * ar[t - 1] + e[t]
    assert abs(effective_sample_size(ar) / 20000 - 0.1 / 1.9) < 0.02


@pytest.fixture(scope="module")
def exact_chains():
    model = MA2Model()
    s_obs = model.simulate_summaries((0.6, 0.2), 1, SeedTree(2024).generator())[0]
    cov = np.array([[0.012, 0.004], [0.004, 0.012]])
    return [run_chain(ChainConfig(20000, cov, DEFAULT_PRIORS["ma2"], seed, (0.6, 0.2)),
                      EstimatorConfig(kind="exact"), model, s_obs) for seed in (301, 302)]


def test_chain_against_itself(exact_chains):
    assert posterior_tv(exact_chains[0], exact_chains[0]) == 0.0


def test_independent_exact_chains_close(exact_chains):
    assert posterior_tv(*exact_chains, bandwidth="ess") < 0.05


def test_posterior_tv_order_invariant(exact_chains, tree):
    a, b = exact_chains
    post = a.thetas[int(0.2 * len(a.thetas)):]
    shuffled = np.vstack([a.thetas[:int(0.2 * len(a.thetas))], tree.generator().permutation(post)])
    assert posterior_tv(shuffled, b) == posterior_tv(a, b)


def test_posterior_tv_empty_chain():
    with pytest.raises(ValueError, match="empty post-burn-in chain"):
        posterior_tv(np.zeros((2, 2)), np.zeros((2, 2)))
