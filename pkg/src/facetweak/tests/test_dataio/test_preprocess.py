import numpy as np
import pytest

from facetweak.dataio.preprocess import (
    NormalizationStats,
    crop_and_resize,
    denormalize_landmarks,
    normalize_landmarks,
    within_enlarged_box,
)
from facetweak.errors import ShapeError


def test_landmark_normalization():
    points = normalize_landmarks(np.array([[50.0, 50.0], [0.0, 100.0]]), (0, 0, 100, 100))
    np.testing.assert_array_equal(points, [[0.5, 0.5], [0.0, 1.0]])
    shifted = normalize_landmarks(np.array([[30.0, 60.0]]), (10, 20, 40, 80))
    np.testing.assert_allclose(shifted, [[0.5, 0.5]])


def test_landmark_denormalization_inverts(rng):
    box = (12.5, 7.0, 88.0, 91.0)
    pixels = rng.uniform(0, 100, size=(5, 2))
    np.testing.assert_allclose(denormalize_landmarks(normalize_landmarks(pixels, box), box), pixels)


def test_full_box_crop_is_identity(rng):
    image = rng.uniform(0, 255, size=(40, 40, 3))
    np.testing.assert_allclose(crop_and_resize(image, (0, 0, 40, 40)), image, atol=1e-9)


def test_crop_downsamples_blocks():
    """A 2x box average of a constant-per-block image keeps the block values."""
    image = np.kron(np.arange(16, dtype=float).reshape(4, 4), np.ones((2, 2)))[:, :, np.newaxis]
    crop = crop_and_resize(image, (0, 0, 8, 8), size=4)
    assert crop.shape == (4, 4, 1)
    np.testing.assert_allclose(crop[:, :, 0], np.arange(16).reshape(4, 4))


def test_crop_rejects_empty_box(rng):
    with pytest.raises(ShapeError):
        crop_and_resize(rng.uniform(size=(10, 10, 3)), (0, 0, 0, 5))


def test_enlarged_box():
    assert within_enlarged_box(np.array([[1.25, -0.25]]))
    assert not within_enlarged_box(np.array([[1.26, 0.5]]))
    assert not within_enlarged_box(np.array([[0.5, -0.3]]))


def test_identical_images_normalize_to_zero():
    images = np.full((4, 40, 40, 3), 128.0)
    stats = NormalizationStats.from_images(images)
    np.testing.assert_array_equal(stats.normalize(images), np.zeros_like(images))
    np.testing.assert_allclose(stats.denormalize(stats.normalize(images)), images)


def test_stats_standardize(rng):
    images = rng.normal(5.0, 3.0, size=(50, 4, 4, 3))
    stats = NormalizationStats.from_images(images)
    out = stats.normalize(images)
    np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(out.std(axis=0), 1.0, atol=1e-12)


def test_stats_need_images():
    with pytest.raises(ShapeError):
        NormalizationStats.from_images(np.zeros((0, 40, 40, 3)))
