import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from walkseg.errors import InvalidInputError
from walkseg.features import (FilterBankConfig, extract_features,
                              per_channel_normalize)


def test_rgb_passthrough_without_banks():
    white = np.ones((1, 1, 3))
    stack = extract_features(white, FilterBankConfig(f1=0, f2=0))
    assert stack.shape == (1, 1, 3)
    np.testing.assert_array_equal(stack, white)


def test_default_bank_has_131_channels():
    image = np.random.default_rng(0).uniform(0, 1, (4, 4, 3))
    stack = extract_features(image, FilterBankConfig())
    assert stack.shape == (4, 4, 131)
    assert FilterBankConfig().num_channels == 131


def test_extraction_is_deterministic():
    rng = np.random.default_rng(11)
    image = rng.uniform(0, 1, (4, 4, 3))
    bank = FilterBankConfig(f1=4, f2=4, seed=7)
    first = extract_features(image, bank)
    second = extract_features(image, bank)
    assert first.tobytes() == second.tobytes()


def test_zero_sized_image_rejected():
    with pytest.raises(InvalidInputError):
        extract_features(np.ones((0, 3, 3)), FilterBankConfig(f1=0, f2=0))


def test_bank2_requires_bank1():
    with pytest.raises(InvalidInputError):
        extract_features(np.ones((2, 2, 3)), FilterBankConfig(f1=0, f2=4))


def test_values_out_of_range_rejected():
    with pytest.raises(InvalidInputError):
        extract_features(np.full((2, 2, 3), 1.5), FilterBankConfig(f1=0, f2=0))


@settings(max_examples=20, deadline=None)
@given(h=st.integers(1, 7), w=st.integers(1, 7),
       f1=st.integers(0, 5), f2=st.integers(0, 5), seed=st.integers(0, 99))
def test_spatial_size_preserved(h, w, f1, f2, seed):
    if f1 == 0:
        f2 = 0
    image = np.random.default_rng(seed).uniform(0, 1, (h, w, 3))
    stack = extract_features(image, FilterBankConfig(f1=f1, f2=f2, seed=seed))
    assert stack.shape == (h, w, 3 + f1 + f2)
    assert np.all(np.isfinite(stack))


def test_normalize_affine_rescale():
    channel = np.array([0.0, 5.0, 10.0]).reshape(1, 3, 1)
    np.testing.assert_allclose(per_channel_normalize(channel).ravel(),
                               [0.0, 0.5, 1.0])


def test_normalize_constant_channel_maps_to_zero():
    channel = np.full((1, 3, 1), 4.0)
    np.testing.assert_array_equal(per_channel_normalize(channel), 0.0)


def test_normalize_fixed_point_on_unit_range():
    rng = np.random.default_rng(5)
    stack = rng.uniform(0, 1, (3, 3, 2))
    stack[0, 0, :] = 0.0
    stack[1, 1, :] = 1.0
    np.testing.assert_array_equal(per_channel_normalize(stack), stack)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 999), k=st.integers(1, 6))
def test_normalize_idempotent(seed, k):
    stack = np.random.default_rng(seed).normal(0, 3, (4, 5, k))
    once = per_channel_normalize(stack)
    twice = per_channel_normalize(once)
    np.testing.assert_array_equal(once, twice)
