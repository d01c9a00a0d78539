from .cluster_analyzer import (
    ClusterAnalyzer,
    ClusterReport,
    LayerClusters,
    attribute_variance,
    cluster_stats,
    principal_axis_variance,
)
from .cluster_images import mean_cluster_images

__all__ = [
    "ClusterAnalyzer",
    "ClusterReport",
    "LayerClusters",
    "attribute_variance",
    "cluster_stats",
    "principal_axis_variance",
    "mean_cluster_images",
]
