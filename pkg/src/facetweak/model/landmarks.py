"""
Landmark sets and the inter-ocular-normalized L2 loss.

Coordinates live in the box-normalized frame: (0, 0) is the top-left corner of
the face box and (1, 1) its bottom-right corner.
"""
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from ..errors import DegenerateGroundTruthError, ShapeError

ROLES = ('left_eye', 'right_eye', 'nose', 'left_mouth', 'right_mouth')
DEFAULT_M = len(ROLES)
# Index permutation that swaps left/right roles under horizontal mirroring.
MIRROR_PERMUTATION = (1, 0, 2, 4, 3)
MIN_INTEROCULAR = 1e-9


@dataclass(frozen=True)
class LandmarkSet:
    """m landmark points, ``points[j] = (x_j, y_j)``; indices 0 and 1 are the eyes."""
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if pts.shape[0] < 2:
            raise ShapeError("A landmark set needs at least the two eye points")
        if not np.all(np.isfinite(pts)):
            raise ShapeError("Landmark coordinates must be finite")
        object.__setattr__(self, 'points', pts)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def interocular(self) -> float:
        return float(np.linalg.norm(self.points[0] - self.points[1]))

    def as_vector(self) -> np.ndarray:
        """Return ``(x_1, y_1, ..., x_m, y_m)``."""
        return self.points.reshape(-1).copy()

    @classmethod
    def from_vector(cls, vector) -> 'LandmarkSet':
        return cls(np.asarray(vector, dtype=np.float64).reshape(-1, 2))

    def __eq__(self, other) -> bool:
        return isinstance(other, LandmarkSet) and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash(self.points.tobytes())


LandmarkLike = Union[LandmarkSet, np.ndarray]


def as_points(landmarks: LandmarkLike) -> np.ndarray:
    if isinstance(landmarks, LandmarkSet):
        return landmarks.points
    return np.asarray(landmarks, dtype=np.float64).reshape(-1, 2)


def interocular_distance(truth: LandmarkLike) -> float:
    """
    Distance between the two ground-truth eye points.

    Raises:
        DegenerateGroundTruthError: distance below 1e-9
    """
    pts = as_points(truth)
    d = float(np.linalg.norm(pts[0] - pts[1]))
    if d < MIN_INTEROCULAR:
        raise DegenerateGroundTruthError(f"Inter-ocular distance {d:.3g} is degenerate")
    return d


def loss(predicted: LandmarkLike, truth: LandmarkLike) -> float:
    """
    Squared L2 error over all 2m coordinates divided by the squared inter-ocular distance.

    Args:
        predicted: Predicted landmarks
        truth: Ground-truth landmarks (eyes at indices 0 and 1)

    Returns:
        float: Loss >= 0
    """
    p, t = as_points(predicted), as_points(truth)
    if p.shape != t.shape:
        raise ShapeError(f"Predicted {p.shape} and truth {t.shape} landmark counts differ")
    iod = interocular_distance(t)
    return float(np.sum((p - t) ** 2) / iod ** 2)


def batch_loss(
    predicted: np.ndarray, truth: np.ndarray
) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Mean loss over a batch and its gradient with respect to the predictions.

    Args:
        predicted: ``N×2m`` raw network outputs
        truth: ``N×m×2`` (or ``N×2m``) ground truth

    Returns:
        (mean loss, per-sample losses ``N``, gradient ``N×2m``)
    """
    n = predicted.shape[0]
    t = np.asarray(truth, dtype=np.float64).reshape(n, -1)
    if t.shape != predicted.shape:
        raise ShapeError(f"Predictions {predicted.shape} do not match targets {t.shape}")
    eyes = t[:, 0:2] - t[:, 2:4]
    iod2 = np.sum(eyes * eyes, axis=1)
    if np.any(iod2 < MIN_INTEROCULAR ** 2):
        raise DegenerateGroundTruthError("Batch contains a degenerate inter-ocular distance")
    diff = predicted - t
    per_sample = np.sum(diff * diff, axis=1) / iod2
    grad = (2.0 / n) * diff / iod2[:, np.newaxis]
    return float(per_sample.mean()), per_sample, grad
