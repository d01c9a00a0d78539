from .comparison import ClusterComparison, ModelComparator
from .metrics import ErrorCurve, ErrorMetrics, cumulative_error_curve, error_rate, error_rates

__all__ = [
    "ClusterComparison",
    "ModelComparator",
    "ErrorCurve",
    "ErrorMetrics",
    "cumulative_error_curve",
    "error_rate",
    "error_rates",
]
