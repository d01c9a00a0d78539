"""
Backward image warping under a similarity transform.
"""
import numpy as np
from scipy import ndimage

from ..errors import ShapeError
from .similarity import SimilarityTransform


def warp_image(image: np.ndarray, transform: SimilarityTransform, fill: float = 0.0) -> np.ndarray:
    """
    ``out(p) = image(transform^-1(p))`` with bilinear interpolation.

    Points are ``(column, row)`` array indices. Source positions outside the
    image take ``fill`` (0 is the dataset mean in normalized space).

    Args:
        image: ``H×W×C`` array
        transform: Pixel-frame similarity
        fill: Value for out-of-image samples

    Raises:
        NumericalError: transform not invertible
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3:
        raise ShapeError(f"Expected an H×W×C image, got shape {image.shape}")
    inverse = transform.inverse()
    if transform.is_identity:
        return image.copy()
    h, w, channels = image.shape
    rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
    src = inverse.apply(np.column_stack([cols.ravel(), rows.ravel()]))
    coords = [src[:, 1].reshape(h, w), src[:, 0].reshape(h, w)]
    out = np.empty_like(image)
    for ch in range(channels):
        out[:, :, ch] = ndimage.map_coordinates(image[:, :, ch], coords, order=1, mode='constant', cval=fill)
    return out
