import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpmn.data.sampling import (
    SamplerConfig,
    sample_shot,
    sample_sparse,
    sample_uniform,
    shot_boundaries,
)
from cpmn.errors import ValidationError


def features(rng, l_u, dim=4):
    return rng.normal(size=(l_u, dim))


# --- uniform -------------------------------------------------------------------

def test_uniform_interval_four(rng):
    sub, idx = sample_uniform(features(rng, 100), 4)
    assert len(idx) == 25
    np.testing.assert_array_equal(idx, np.arange(0, 100, 4))
    assert idx[-1] == 96


def test_uniform_identity(rng):
    x = features(rng, 17)
    sub, idx = sample_uniform(x, 1)
    np.testing.assert_array_equal(sub, x)
    np.testing.assert_array_equal(idx, np.arange(17))


def test_uniform_enumeration_oracle(rng):
    x = features(rng, 10)
    _, idx = sample_uniform(x, 3)
    assert list(idx) == [i for i in range(10) if i % 3 == 0] == [0, 3, 6, 9]


@given(l_u=st.integers(1, 200), sigma=st.integers(1, 20))
@settings(max_examples=60, deadline=None)
def test_uniform_length_exact(l_u, sigma):
    x = np.zeros((l_u, 2))
    _, idx = sample_uniform(x, sigma)
    assert len(idx) == -(-l_u // sigma)  # ceil


# --- sparse --------------------------------------------------------------------

def test_sparse_partition_bounds(rng):
    x = features(rng, 100)
    _, idx = sample_sparse(x, 20, np.random.default_rng(0))
    assert len(idx) == 20
    for i, j in enumerate(idx):
        assert 5 * i <= j < 5 * (i + 1)


def test_sparse_full_is_identity(rng):
    x = features(rng, 9)
    sub, idx = sample_sparse(x, 9, np.random.default_rng(0))
    np.testing.assert_array_equal(idx, np.arange(9))
    np.testing.assert_array_equal(sub, x)


def test_sparse_reproducible(rng):
    x = features(rng, 50)
    _, idx1 = sample_sparse(x, 10, np.random.default_rng(42))
    _, idx2 = sample_sparse(x, 10, np.random.default_rng(42))
    np.testing.assert_array_equal(idx1, idx2)


def test_sparse_too_many_segments(rng):
    with pytest.raises(ValidationError):
        sample_sparse(features(rng, 5), 6, np.random.default_rng(0))


@given(l_u=st.integers(2, 120), data=st.data())
@settings(max_examples=50, deadline=None)
def test_sparse_indices_strictly_increasing(l_u, data):
    p = data.draw(st.integers(1, l_u))
    x = np.random.default_rng(l_u).normal(size=(l_u, 3))
    sub, idx = sample_sparse(x, p, np.random.default_rng(7))
    assert len(idx) == p
    assert (np.diff(idx) > 0).all()
    np.testing.assert_array_equal(sub, x[idx])


# --- shot ----------------------------------------------------------------------

def test_shot_step_change_single_boundary():
    x = np.zeros((100, 3))
    x[50:] = 5.0
    cuts = shot_boundaries(x, threshold=2.0)
    np.testing.assert_array_equal(cuts, [50])
    sub, idx = sample_shot(x, threshold=2.0)
    assert len(idx) == 2
    assert idx[0] < 50 <= idx[1]


def test_shot_constant_features_single_shot():
    x = np.ones((30, 2))
    sub, idx = sample_shot(x, threshold=2.0)
    assert len(idx) == 1


def test_shot_zero_threshold_identity(rng):
    # Every consecutive distance is positive, so each unit becomes its own shot.
    x = features(rng, 25)
    sub, idx = sample_shot(x, threshold=0.0)
    np.testing.assert_array_equal(idx, np.arange(25))
    np.testing.assert_array_equal(sub, x)


def test_shot_preserves_values(rng):
    x = features(rng, 40)
    sub, idx = sample_shot(x, threshold=1.5)
    assert (np.diff(idx) > 0).all()
    np.testing.assert_array_equal(sub, x[idx])


def test_sampler_config_validation():
    with pytest.raises(ValidationError):
        SamplerConfig(mode="nope")
    with pytest.raises(ValidationError):
        SamplerConfig(mode="uniform", interval=0)
