"""
Non-reflective 2-D similarity transforms and their least-squares estimation.

A transform ``(a, b, tx, ty)`` maps ``(x, y)`` to
``(a*x - b*y + tx, b*x + a*y + ty)``: rotation by ``atan2(b, a)``, uniform
scale ``sqrt(a^2 + b^2)``, then translation.
"""
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..errors import DegenerateConfigurationError, NumericalError, ShapeError

MIN_SCALE = 1e-9
# Squared spread below which source points count as coincident.
MIN_SPREAD = 1e-24


@dataclass(frozen=True)
class SimilarityTransform:
    a: float = 1.0
    b: float = 0.0
    tx: float = 0.0
    ty: float = 0.0

    @classmethod
    def identity(cls) -> 'SimilarityTransform':
        return cls()

    @classmethod
    def from_params(cls, scale: float, rotation: float, tx: float = 0.0, ty: float = 0.0) -> 'SimilarityTransform':
        """Build from scale and rotation angle (radians)."""
        return cls(scale * math.cos(rotation), scale * math.sin(rotation), tx, ty)

    @property
    def scale(self) -> float:
        return math.hypot(self.a, self.b)

    @property
    def rotation(self) -> float:
        return math.atan2(self.b, self.a)

    @property
    def is_identity(self) -> bool:
        return self.a == 1.0 and self.b == 0.0 and self.tx == 0.0 and self.ty == 0.0

    def matrix(self) -> np.ndarray:
        return np.array([[self.a, -self.b], [self.b, self.a]])

    def translation(self) -> np.ndarray:
        return np.array([self.tx, self.ty])

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map ``N×2`` (or a single ``2``) point array."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.matrix().T + self.translation()

    def inverse(self) -> 'SimilarityTransform':
        """
        Raises:
            NumericalError: scale below 1e-9
        """
        s2 = self.a * self.a + self.b * self.b
        if math.sqrt(s2) <= MIN_SCALE:
            raise NumericalError(f"Similarity transform with scale {math.sqrt(s2):.3g} is not invertible")
        a, b = self.a / s2, -self.b / s2
        tx = -(a * self.tx - b * self.ty)
        ty = -(b * self.tx + a * self.ty)
        return SimilarityTransform(a, b, tx, ty)

    def compose(self, other: 'SimilarityTransform') -> 'SimilarityTransform':
        """``self ∘ other``: apply ``other`` first."""
        a = self.a * other.a - self.b * other.b
        b = self.b * other.a + self.a * other.b
        tx = self.a * other.tx - self.b * other.ty + self.tx
        ty = self.b * other.tx + self.a * other.ty + self.ty
        return SimilarityTransform(a, b, tx, ty)

    def to_pixel_frame(self, size: int) -> 'SimilarityTransform':
        """
        The same map expressed on array indices of a ``size×size`` crop, where
        the box-normalized point ``x`` sits at index ``x*size - 0.5``.
        """
        offset = 0.5 * (self.matrix() - np.eye(2)) @ np.ones(2)
        t = size * self.translation() + offset
        return SimilarityTransform(self.a, self.b, float(t[0]), float(t[1]))


def estimate_similarity(src: np.ndarray, dst: np.ndarray) -> Tuple[SimilarityTransform, float]:
    """
    Least-squares similarity mapping ``src`` onto ``dst``.

    Args:
        src: ``m×2`` source points (m >= 2)
        dst: ``m×2`` destination points

    Returns:
        (transform, residual sum of squared distances)

    Raises:
        DegenerateConfigurationError: all source points coincide
    """
    src = np.asarray(src, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 2)
    if src.shape != dst.shape:
        raise ShapeError(f"Point sets differ in shape: {src.shape} vs {dst.shape}")
    if src.shape[0] < 2:
        raise DegenerateConfigurationError("A similarity needs at least two point pairs")
    mu_s, mu_d = src.mean(axis=0), dst.mean(axis=0)
    s, d = src - mu_s, dst - mu_d
    spread = float(np.sum(s[:, 0] * s[:, 0] + s[:, 1] * s[:, 1]))
    if spread <= MIN_SPREAD:
        raise DegenerateConfigurationError("All source points coincide")
    a = float(np.sum(s[:, 0] * d[:, 0] + s[:, 1] * d[:, 1])) / spread
    b = float(np.sum(s[:, 0] * d[:, 1] - s[:, 1] * d[:, 0])) / spread
    t = mu_d - np.array([[a, -b], [b, a]]) @ mu_s
    transform = SimilarityTransform(a, b, float(t[0]), float(t[1]))
    residual = float(np.sum((transform.apply(src) - dst) ** 2))
    return transform, residual
