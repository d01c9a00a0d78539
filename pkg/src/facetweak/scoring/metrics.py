"""
Landmark error metrics: per-image error as a percent of the inter-ocular
distance, and cumulative error curves with detector failures counted as
misses.
"""
from typing import Dict, List, Optional, Sequence
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..errors import DegenerateGroundTruthError, ShapeError
from ..model.landmarks import MIN_INTEROCULAR, as_points, interocular_distance


def error_rate(predicted, truth) -> float:
    """
    Mean point distance between prediction and truth, in percent of the
    inter-ocular distance.

    Raises:
        DegenerateGroundTruthError: truth eyes coincide
    """
    p, t = as_points(predicted), as_points(truth)
    if p.shape != t.shape:
        raise ShapeError(f"Predicted {p.shape} and truth {t.shape} landmark counts differ")
    iod = interocular_distance(t)
    return 100.0 * float(np.mean(np.linalg.norm(p - t, axis=1))) / iod


def error_rates(predicted: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Batched ``error_rate`` over ``N×m×2`` arrays."""
    p = np.asarray(predicted, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 3:
        raise ShapeError(f"Expected matching N×m×2 arrays, got {p.shape} and {t.shape}")
    iod = np.linalg.norm(t[:, 0] - t[:, 1], axis=1)
    if np.any(iod < MIN_INTEROCULAR):
        raise DegenerateGroundTruthError("Ground truth contains a degenerate inter-ocular distance")
    return 100.0 * np.linalg.norm(p - t, axis=2).mean(axis=1) / iod


@dataclass
class ErrorCurve:
    """Fraction of images whose error is at most each threshold (percent)."""
    thresholds: np.ndarray
    fractions: np.ndarray
    count: int
    failures: int
    mean_error: float

    def to_frame(self, label: Optional[str] = None) -> pd.DataFrame:
        df = pd.DataFrame({'threshold': self.thresholds, 'fraction': self.fractions})
        if label is not None:
            df.insert(0, 'model', label)
        return df


def cumulative_error_curve(
    errors: Sequence[float], thresholds: Sequence[float], failures: int = 0
) -> ErrorCurve:
    """
    Cumulative error curve.

    Args:
        errors: Per-image errors in percent; ``inf`` marks a detector failure
        thresholds: Error thresholds in percent
        failures: Further detector failures not present in ``errors``

    Returns:
        ErrorCurve; ``fractions[i]`` counts errors at or below
        ``thresholds[i]`` over all images, failures included
    """
    errs = np.asarray(list(errors), dtype=np.float64)
    total = len(errs) + failures
    if total == 0:
        raise ShapeError("Cannot build an error curve from no images")
    thr = np.asarray(list(thresholds), dtype=np.float64)
    finite = errs[np.isfinite(errs)]
    ordered = np.sort(finite)
    below = np.searchsorted(ordered, thr, side='right')
    return ErrorCurve(
        thresholds=thr,
        fractions=below / total,
        count=total,
        failures=failures + int(np.sum(~np.isfinite(errs))),
        mean_error=float(finite.mean()) if len(finite) else float('nan'),
    )


class ErrorMetrics:
    """Summaries of per-image errors for one model."""

    def __init__(self, thresholds: Sequence[float]):
        self.thresholds = list(thresholds)
        self.logger = logging.getLogger(__name__)

    def curve(self, errors: Sequence[float], failures: int = 0) -> ErrorCurve:
        return cumulative_error_curve(errors, self.thresholds, failures)

    def summary(self, label: str, errors: Sequence[float], failures: int = 0) -> Dict:
        """
        Args:
            label: Model name
            errors: Per-image errors in percent
            failures: Detector failures

        Returns:
            Dict with count, failures, mean and median error and the share
            of images within 5% and 10%
        """
        curve = self.curve(errors, failures)
        finite = np.asarray([e for e in errors if np.isfinite(e)], dtype=np.float64)
        summary = {
            'model': label,
            'count': curve.count,
            'failures': curve.failures,
            'mean_error': curve.mean_error,
            'median_error': float(np.median(finite)) if len(finite) else float('nan'),
            'within_5': cumulative_error_curve(errors, [5.0], failures).fractions[0],
            'within_10': cumulative_error_curve(errors, [10.0], failures).fractions[0],
        }
        self.logger.info(
            f"{label}: mean error {summary['mean_error']:.3f}% over {curve.count - curve.failures} faces, "
            f"{curve.failures} failures"
        )
        return summary

    @staticmethod
    def curves_frame(curves: Dict[str, ErrorCurve]) -> pd.DataFrame:
        frames: List[pd.DataFrame] = [c.to_frame(label) for label, c in curves.items()]
        return pd.concat(frames, ignore_index=True)
