"""Tests for the procedural texture generators."""

import numpy as np
import pytest

from stylebalance.exceptions import PreconditionError
from stylebalance.textures import noise_image, texture_image, texture_set


def test_texture_shape_and_range():
    img = texture_image(np.random.default_rng(0), size=16, channels=3)
    assert img.data.shape == (16, 16, 3)
    assert img.data.min() >= 0.0 and img.data.max() <= 1.0


def test_texture_set_deterministic():
    a = texture_set(5, 4, size=8)
    b = texture_set(5, 4, size=8)
    assert len(a) == 4
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.data, y.data)


def test_texture_set_members_differ():
    imgs = texture_set(0, 6, size=16)
    flat = [tuple(i.data.reshape(-1)[:20]) for i in imgs]
    assert len(set(flat)) == 6


def test_brightness_spread():
    """The log-uniform brightness should spread image means over at least
    a couple of decades across a modest set."""
    means = [float(i.data.mean()) for i in texture_set(1, 40, size=16)]
    assert max(means) / min(means) > 100.0


def test_size_floor():
    with pytest.raises(PreconditionError):
        texture_image(np.random.default_rng(0), size=2)


def test_noise_image():
    a = noise_image(7, size=8, channels=1)
    b = noise_image(7, size=8, channels=1)
    assert a.data.shape == (8, 8, 1)
    np.testing.assert_array_equal(a.data, b.data)
    assert not np.array_equal(a.data, noise_image(8, size=8, channels=1).data)
