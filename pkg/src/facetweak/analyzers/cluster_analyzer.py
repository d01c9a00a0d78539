"""
Cluster statistics over the features of each network layer.

For every tap the training faces are clustered with a diagonal mixture, and
each cluster is described by how widely its ground-truth landmarks spread
(variance along the principal axis, per landmark) and how mixed its binary
attributes are. Clusters that gather faces by pose show small landmark
spread; clusters that ignore pose show large spread.

All variances are population (divide-by-n) variances in box-normalized
coordinates.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..clustering.gmm import GmmFitter
from ..dataio.annotations import ATTRIBUTE_NAMES
from ..model.landmarks import ROLES

logger = logging.getLogger(__name__)


def principal_axis_variance(points: np.ndarray) -> float:
    """Largest eigenvalue of the population covariance of ``n×2`` points (0 for one point)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 2:
        return 0.0
    cov = np.cov(pts, rowvar=False, bias=True)
    return float(max(np.linalg.eigvalsh(cov)[-1], 0.0))


def attribute_variance(labels: Sequence[int]) -> float:
    """Population variance ``p(1-p)`` of 0/1 labels."""
    p = float(np.mean(np.asarray(labels, dtype=np.float64)))
    return p * (1.0 - p)


def cluster_sizes(assignments: np.ndarray, k: int) -> np.ndarray:
    return np.bincount(np.asarray(assignments, dtype=np.int64), minlength=k)


def cluster_stats(sizes: Sequence[int]) -> Tuple[float, float]:
    """Median and population standard deviation of cluster sizes."""
    sizes = np.asarray(sizes, dtype=np.float64)
    return float(np.median(sizes)), float(np.std(sizes))


def format_stats(median: float, sd: float) -> str:
    return f"{median:.1f} ± {sd:.1f}"


@dataclass
class LayerClusters:
    """Clusters of one tap and their per-cluster statistics."""
    tap: str
    k: int
    assignments: np.ndarray
    landmark_variance: np.ndarray                # k×m, NaN rows for empty clusters
    attribute_variance: Optional[np.ndarray] = None  # k×attributes

    @property
    def sizes(self) -> np.ndarray:
        return cluster_sizes(self.assignments, self.k)

    @property
    def occupied(self) -> np.ndarray:
        return self.sizes > 0

    def _aggregate(self, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        rows = values[self.occupied]
        mean = rows.mean(axis=0)
        se = rows.std(axis=0) / np.sqrt(len(rows))
        return mean, se

    def landmark_summary(self) -> Tuple[np.ndarray, np.ndarray]:
        """Mean over clusters of the per-landmark principal-axis variance, with standard errors."""
        return self._aggregate(self.landmark_variance)

    def attribute_summary(self) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        if self.attribute_variance is None:
            return None
        return self._aggregate(self.attribute_variance)

    def most_variable_cluster(self) -> int:
        """Occupied cluster with the largest mean landmark variance."""
        spread = np.where(self.occupied, np.nan_to_num(self.landmark_variance.mean(axis=1), nan=-1.0), -1.0)
        return int(np.argmax(spread))


@dataclass
class ClusterReport:
    layers: Dict[str, LayerClusters] = field(default_factory=dict)
    scatter: Dict[str, pd.DataFrame] = field(default_factory=dict)

    def sizes_frame(self) -> pd.DataFrame:
        rows = [
            {'tap': tap, 'cluster': c, 'size': int(s)}
            for tap, layer in self.layers.items()
            for c, s in enumerate(layer.sizes)
        ]
        return pd.DataFrame(rows, columns=['tap', 'cluster', 'size'])

    def size_summary_frame(self) -> pd.DataFrame:
        rows = []
        for tap, layer in self.layers.items():
            median, sd = cluster_stats(layer.sizes)
            rows.append({'tap': tap, 'k': layer.k, 'median': median, 'sd': sd,
                         'summary': format_stats(median, sd)})
        return pd.DataFrame(rows, columns=['tap', 'k', 'median', 'sd', 'summary'])

    def landmark_frame(self) -> pd.DataFrame:
        rows = []
        for tap, layer in self.layers.items():
            mean, se = layer.landmark_summary()
            for j, (mu, err) in enumerate(zip(mean, se)):
                role = ROLES[j] if j < len(ROLES) else f"landmark_{j}"
                rows.append({'tap': tap, 'landmark': role, 'mean_variance': float(mu), 'se': float(err)})
        return pd.DataFrame(rows, columns=['tap', 'landmark', 'mean_variance', 'se'])

    def attribute_frame(self) -> pd.DataFrame:
        rows = []
        for tap, layer in self.layers.items():
            summary = layer.attribute_summary()
            if summary is None:
                continue
            for name, mu, err in zip(ATTRIBUTE_NAMES, *summary):
                rows.append({'tap': tap, 'attribute': name, 'mean_variance': float(mu), 'se': float(err)})
        return pd.DataFrame(rows, columns=['tap', 'attribute', 'mean_variance', 'se'])


class ClusterAnalyzer:
    """Clusters a dataset at several taps of a trained network and measures each clustering."""

    SCATTER_TAPS = ('input', 'FC5')

    def __init__(
        self,
        k: int = 16,
        seed: int = 0,
        max_iter: int = 300,
        tol: float = 1e-7,
        scatter_faces: int = 15,
        jobs: int = 1,
    ):
        self.k = k
        self.seed = seed
        self.max_iter = max_iter
        self.tol = tol
        self.scatter_faces = scatter_faces
        self.jobs = jobs
        self.logger = logging.getLogger(__name__)

    def describe_clusters(
        self,
        assignments: np.ndarray,
        landmarks: np.ndarray,
        attributes: Optional[np.ndarray],
        k: int,
        tap: str = '',
    ) -> LayerClusters:
        """Per-cluster landmark and attribute variances for a fixed assignment."""
        landmarks = np.asarray(landmarks, dtype=np.float64)
        m = landmarks.shape[1]
        lam = np.full((k, m), np.nan)
        attr = None if attributes is None else np.full((k, attributes.shape[1]), np.nan)
        for c in range(k):
            members = np.flatnonzero(assignments == c)
            if len(members) == 0:
                continue
            lam[c] = [principal_axis_variance(landmarks[members, j]) for j in range(m)]
            if attr is not None:
                attr[c] = [attribute_variance(attributes[members, a]) for a in range(attributes.shape[1])]
        return LayerClusters(tap, k, np.asarray(assignments), lam, attr)

    def analyze_tap(self, model, dataset, tap: str) -> LayerClusters:
        features = model.extract_features_batch(dataset.images, tap=tap)
        k = min(self.k, len(features))
        fitter = GmmFitter(k, max_iter=self.max_iter, tol=self.tol, tap=tap, jobs=self.jobs)
        result = fitter.fit(features, seed=self.seed, stream_name=('analysis', tap))
        assignments, _ = result.model.assign_many(features)
        layer = self.describe_clusters(
            assignments, dataset.landmarks, dataset.attributes if dataset.has_attributes else None, k, tap
        )
        median, sd = cluster_stats(layer.sizes)
        self.logger.info(
            f"{tap}: {k} clusters over {features.shape[1]} features, sizes {format_stats(median, sd)}"
        )
        return layer

    def scatter_frame(self, layer: LayerClusters, landmarks: np.ndarray) -> pd.DataFrame:
        """Ground-truth landmarks of up to ``scatter_faces`` members of the most variable cluster."""
        cluster = layer.most_variable_cluster()
        members = np.flatnonzero(layer.assignments == cluster)[: self.scatter_faces]
        rows = []
        for face in members:
            for j, (x, y) in enumerate(landmarks[face]):
                role = ROLES[j] if j < len(ROLES) else f"landmark_{j}"
                rows.append({'cluster': cluster, 'face': int(face), 'landmark': role, 'x': float(x), 'y': float(y)})
        return pd.DataFrame(rows, columns=['cluster', 'face', 'landmark', 'x', 'y'])

    def analyze(self, model, dataset, taps: Sequence[str]) -> ClusterReport:
        """
        Args:
            model: Trained NetworkModel
            dataset: LandmarkDataset (normalized images, box-normalized landmarks)
            taps: Layers whose inputs are clustered

        Returns:
            ClusterReport
        """
        report = ClusterReport()
        for tap in taps:
            layer = self.analyze_tap(model, dataset, tap)
            report.layers[tap] = layer
            if tap in self.SCATTER_TAPS:
                report.scatter[tap] = self.scatter_frame(layer, dataset.landmarks)
        return report


def landmark_spread_drop(report: ClusterReport, low: str = 'input', high: str = 'FC5') -> Optional[float]:
    """Relative drop of the mean landmark variance from tap ``low`` to tap ``high``."""
    if low not in report.layers or high not in report.layers:
        return None
    before = float(np.mean(report.layers[low].landmark_summary()[0]))
    after = float(np.mean(report.layers[high].landmark_summary()[0]))
    return (before - after) / before if before > 0 else None
