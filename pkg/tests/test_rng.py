import numpy as np
import pytest
from hypothesis import given, strategies as st

from semibsl import rng as rngmod
from semibsl.rng import SeedTree, derive_stream


def test_same_path_gives_identical_stream():
    a = SeedTree(5, (1, 2)).generator().random(100)
    b = SeedTree(5, (1, 2)).generator().random(100)
    assert np.array_equal(a, b)


@given(st.integers(0, 2**63 - 1), st.integers(0, 1000), st.integers(0, 1000))
def test_derive_composes_by_path(root, i, j):
    t = derive_stream(derive_stream(SeedTree(root), i), j)
    assert t == SeedTree(root, (i, j))
    assert t.generator().random() == SeedTree(root, (i, j)).generator().random()


@given(st.integers(0, 2**32), st.integers(0, 50), st.integers(0, 50))
def test_siblings_differ(root, i, j):
    if i == j:
        return
    a = SeedTree(root).derive(i).generator().integers(0, 2**63, 4)
    b = SeedTree(root).derive(j).generator().integers(0, 2**63, 4)
    assert not np.array_equal(a, b)


def test_negative_index_rejected():
    with pytest.raises(ValueError):
        SeedTree(1).derive(-1)


def test_sibling_streams_uncorrelated(tree):
    a = rngmod.uniform(tree.derive(0).generator(), 10**6)
    b = rngmod.uniform(tree.derive(1).generator(), 10**6)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.01


def test_exponential_mean(gen):
    x = rngmod.exponential(gen, 2.0, 10**6)
    assert abs(x.mean() - 0.5) < 0.003


def test_exponential_rejects_bad_rate(gen):
    with pytest.raises(ValueError):
        rngmod.exponential(gen, 0.0, 3)


def test_uniform_range(gen):
    u = rngmod.uniform(gen, 10**6)
    assert u.min() >= 0.0 and u.max() < 1.0


def test_gaussian_moments(gen):
    z = rngmod.gaussian(gen, 10**6)
    assert abs(z.mean()) < 0.005
    kurt = np.mean((z - z.mean()) ** 4) / np.var(z) ** 2
    assert abs(kurt - 3.0) < 0.05


def test_as_generator_accepts_several_forms():
    g = np.random.default_rng(0)
    assert rngmod.as_generator(g) is g
    assert rngmod.as_generator(7).random() == SeedTree(7).generator().random()
