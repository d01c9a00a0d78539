"""
Average face of every cluster, tiled into one raster.
"""
import logging
import math
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from PIL import Image

logger = logging.getLogger(__name__)

GAP = 2


def cluster_means(images: np.ndarray, assignments: np.ndarray, k: int) -> np.ndarray:
    """
    Per-cluster pixel means of de-normalized ``N×H×W×C`` images.

    Returns:
        ``k×H×W×C`` float array; empty clusters are black
    """
    images = np.asarray(images, dtype=np.float64)
    assignments = np.asarray(assignments)
    means = np.zeros((k,) + images.shape[1:])
    for c in range(k):
        members = assignments == c
        if not np.any(members):
            logger.warning(f"Cluster {c} is empty; drawn black in the mean-image grid")
            continue
        means[c] = images[members].mean(axis=0)
    return means


def tile(tiles: np.ndarray, columns: Optional[int] = None) -> np.ndarray:
    """Arrange ``k×H×W×C`` tiles row-major on a black canvas, ``GAP`` pixels apart."""
    k, h, w, c = tiles.shape
    columns = columns or max(1, math.ceil(math.sqrt(k)))
    rows = math.ceil(k / columns)
    canvas = np.zeros((rows * (h + GAP) + GAP, columns * (w + GAP) + GAP, c))
    for i, t in enumerate(tiles):
        r, col = divmod(i, columns)
        y, x = GAP + r * (h + GAP), GAP + col * (w + GAP)
        canvas[y:y + h, x:x + w] = t
    return canvas


def mean_cluster_images(
    images: np.ndarray,
    assignments: np.ndarray,
    k: int,
    order: Optional[Sequence[int]] = None,
    columns: Optional[int] = None,
) -> np.ndarray:
    """
    Grid of cluster-mean images.

    Args:
        images: De-normalized images (0..255)
        assignments: Cluster index per image
        k: Number of clusters
        order: Cluster indices in display order (default ``0..k-1``)
        columns: Grid width in tiles

    Returns:
        uint8 ``H×W×C`` raster
    """
    means = cluster_means(images, assignments, k)
    order = list(range(k)) if order is None else [int(c) for c in order]
    grid = tile(means[order], columns)
    return np.clip(np.round(grid), 0, 255).astype(np.uint8)


def save_image(raster: np.ndarray, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(raster).save(path, format='PNG')
    logger.info(f"Wrote {path}")
    return path
