from .gmm import FitResult, GmmFitter, GmmModel, assign, assign_many, fit, posteriors_from_log

__all__ = [
    "FitResult",
    "GmmFitter",
    "GmmModel",
    "assign",
    "assign_many",
    "fit",
    "posteriors_from_log",
]
