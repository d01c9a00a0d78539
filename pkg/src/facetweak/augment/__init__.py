from .cluster_augmenter import AugmentationStats, RejectionCheck, augment_cluster, make_candidate, measure_rejection
from .similarity import SimilarityTransform, estimate_similarity
from .warp import warp_image

__all__ = [
    "AugmentationStats",
    "RejectionCheck",
    "SimilarityTransform",
    "augment_cluster",
    "estimate_similarity",
    "make_candidate",
    "measure_rejection",
    "warp_image",
]
