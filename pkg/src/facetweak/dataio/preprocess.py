"""
Face-crop preprocessing: bilinear box crops, image normalization and the
box-normalized landmark frame.

Pixel convention: continuous coordinate ``u`` covers ``[0, W]`` with pixel
``j`` centred at ``j + 0.5``. A box-normalized coordinate ``x`` maps to
``u = bx + x * bw``; inside a ``S×S`` crop it sits at array index ``x*S - 0.5``.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import ndimage

from ..errors import ShapeError

CROP_SIZE = 40
STD_FLOOR = 1e-6

Box = Tuple[float, float, float, float]


@dataclass
class NormalizationStats:
    """Per-pixel mean and standard deviation of the training crops."""
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.maximum(np.asarray(self.std, dtype=np.float64), STD_FLOOR)
        if self.mean.shape != self.std.shape:
            raise ShapeError(f"Mean {self.mean.shape} and std {self.std.shape} differ in shape")

    @classmethod
    def from_images(cls, images: np.ndarray) -> 'NormalizationStats':
        """Compute statistics over ``N×H×W×C`` raw crops (population std, floored)."""
        images = np.asarray(images, dtype=np.float64)
        if images.ndim != 4 or images.shape[0] == 0:
            raise ShapeError(f"Need a non-empty N×H×W×C stack, got {images.shape}")
        return cls(mean=images.mean(axis=0), std=images.std(axis=0))

    def normalize(self, images: np.ndarray) -> np.ndarray:
        return (np.asarray(images, dtype=np.float64) - self.mean) / self.std

    def denormalize(self, images: np.ndarray) -> np.ndarray:
        return np.asarray(images, dtype=np.float64) * self.std + self.mean


def crop_and_resize(image: np.ndarray, box: Box, size: int = CROP_SIZE) -> np.ndarray:
    """
    Resample the face box to ``size×size`` with bilinear interpolation.

    Args:
        image: ``H×W×C`` raster (any numeric dtype)
        box: ``(x, y, w, h)`` in pixels
        size: Output side length

    Returns:
        ``size×size×C`` float64 crop in the input's value range
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, np.newaxis]
    bx, by, bw, bh = (float(v) for v in box)
    if bw <= 0 or bh <= 0:
        raise ShapeError(f"Box must have positive extent, got {box}")
    centres = np.arange(size) + 0.5
    rows = by + centres * bh / size - 0.5
    cols = bx + centres * bw / size - 0.5
    grid_r, grid_c = np.meshgrid(rows, cols, indexing='ij')
    out = np.empty((size, size, img.shape[2]))
    for ch in range(img.shape[2]):
        out[:, :, ch] = ndimage.map_coordinates(
            img[:, :, ch], [grid_r, grid_c], order=1, mode='nearest'
        )
    return out


def normalize_landmarks(pixels: np.ndarray, box: Box) -> np.ndarray:
    """Pixel coordinates to the box-normalized frame."""
    bx, by, bw, bh = (float(v) for v in box)
    pts = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    return (pts - np.array([bx, by])) / np.array([bw, bh])


def denormalize_landmarks(points: np.ndarray, box: Box) -> np.ndarray:
    """Box-normalized coordinates back to pixels."""
    bx, by, bw, bh = (float(v) for v in box)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    return pts * np.array([bw, bh]) + np.array([bx, by])


def within_enlarged_box(points: np.ndarray, factor: float = 1.5) -> bool:
    """True when every box-normalized point lies in the box scaled by ``factor`` about its centre."""
    half = factor / 2.0
    pts = np.asarray(points, dtype=np.float64)
    return bool(np.all(np.abs(pts - 0.5) <= half))
