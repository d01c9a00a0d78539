"""
Horizontal mirroring of samples and landmark sets.
"""
import numpy as np

from ..errors import ShapeError
from ..model.landmarks import MIRROR_PERMUTATION, LandmarkSet, as_points
from .dataset import Sample


def mirror_landmarks(landmarks) -> LandmarkSet:
    """
    Mirror box-normalized landmarks: x -> 1 - x, then swap left/right roles.

    Raises:
        ShapeError: the set does not have the 5-point role layout
    """
    pts = as_points(landmarks)
    if pts.shape[0] != len(MIRROR_PERMUTATION):
        raise ShapeError(
            f"Mirroring needs the {len(MIRROR_PERMUTATION)}-point role layout, got {pts.shape[0]} points"
        )
    flipped = np.column_stack([1.0 - pts[:, 0], pts[:, 1]])
    return LandmarkSet(flipped[list(MIRROR_PERMUTATION)])


def mirror_images(images: np.ndarray) -> np.ndarray:
    """Reverse the column axis of an ``H×W×C`` image or ``N×H×W×C`` batch."""
    images = np.asarray(images)
    return np.ascontiguousarray(images[..., ::-1, :])


def mirror_normalized(images: np.ndarray, stats=None) -> np.ndarray:
    """
    Mirror normalized crops in raw pixel space.

    Per-pixel statistics are not left-right symmetric, so the crop is
    de-normalized, flipped and normalized again. Without ``stats`` this is
    ``mirror_images``.
    """
    if stats is None:
        return mirror_images(images)
    return stats.normalize(mirror_images(stats.denormalize(images)))


def mirror_sample(sample, stats=None):
    """Mirrored copy of a sample; attributes, path and mode are kept. Pass ``stats`` for normalized images."""
    return Sample(
        image=mirror_normalized(sample.image, stats),
        landmarks=mirror_landmarks(sample.landmarks),
        attributes=None if sample.attributes is None else np.array(sample.attributes),
        path=sample.path,
        mode=sample.mode,
    )


def mirror_landmark_array(points: np.ndarray) -> np.ndarray:
    """Batched ``mirror_landmarks`` over an ``N×5×2`` array."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 3 or pts.shape[1:] != (len(MIRROR_PERMUTATION), 2):
        raise ShapeError(f"Expected an N×{len(MIRROR_PERMUTATION)}×2 array, got shape {pts.shape}")
    flipped = pts[:, list(MIRROR_PERMUTATION), :].copy()
    flipped[:, :, 0] = 1.0 - flipped[:, :, 0]
    return flipped
