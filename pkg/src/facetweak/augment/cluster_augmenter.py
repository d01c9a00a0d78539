"""
Alignment-sensitive augmentation of one feature cluster.

New samples come from warping a member image by the similarity that maps
another member's landmarks onto its own. A candidate is kept only if the
trunk's tap feature of the warped image still routes to the same cluster.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..config import WARP_MODES
from ..errors import ConfigError, DegenerateConfigurationError
from ..dataio.preprocess import CROP_SIZE
from .similarity import estimate_similarity
from .warp import warp_image

logger = logging.getLogger(__name__)

FILL_VALUE = 0.0


@dataclass
class AugmentationStats:
    """Bookkeeping for one cluster's augmentation run."""
    cluster: int
    members: int
    target: int
    attempted: int = 0
    accepted: int = 0
    rejected: int = 0

    @property
    def rejection_rate(self) -> float:
        return self.rejected / self.attempted if self.attempted else 0.0

    @property
    def shortfall(self) -> int:
        return max(0, self.target - self.members - self.accepted)

    def to_row(self) -> Dict:
        return {
            'cluster': self.cluster,
            'members': self.members,
            'target': self.target,
            'attempted': self.attempted,
            'accepted': self.accepted,
            'rejected': self.rejected,
            'rejection_rate': self.rejection_rate,
            'shortfall': self.shortfall,
        }


@dataclass
class RejectionCheck:
    """Rejection rate of candidates whose source images come from ``source`` ('same' or 'cross')."""
    cluster: int
    source: str
    attempted: int
    rejected: int

    @property
    def rejection_rate(self) -> float:
        return self.rejected / self.attempted if self.attempted else float('nan')


def make_candidate(
    image: np.ndarray,
    source_landmarks: np.ndarray,
    label_landmarks: np.ndarray,
    warp_mode: str = 'literal',
    size: int = CROP_SIZE,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Warp ``image`` (whose landmarks are ``source_landmarks``) using the
    similarity ``H`` mapping ``label_landmarks`` onto ``source_landmarks``.

    ``literal`` samples ``image`` at ``H^-1(x)``; ``aligned`` samples it at
    ``H(x)``, which carries the source landmarks onto the label positions.

    Returns:
        (warped image, landmark labels)

    Raises:
        DegenerateConfigurationError: label landmarks coincide
    """
    transform, _ = estimate_similarity(label_landmarks, source_landmarks)
    if warp_mode == 'aligned':
        transform = transform.inverse()
    elif warp_mode != 'literal':
        raise ConfigError(f"Unknown warp mode {warp_mode!r}; expected one of {', '.join(WARP_MODES)}")
    warped = warp_image(image, transform.to_pixel_frame(size), fill=FILL_VALUE)
    return warped, np.array(label_landmarks, dtype=np.float64)


def _route(trunk, router, images: np.ndarray) -> np.ndarray:
    features = trunk.extract_features_batch(images, tap=router.tap)
    labels, _ = router.assign_many(features)
    return labels


def _warp_pairs(images, landmarks, sources, targets, warp_mode):
    """Candidates for (source image index, label index) pairs; degenerate pairs are dropped."""
    warped, labels = [], []
    for s, t in zip(sources, targets):
        try:
            img, lab = make_candidate(images[s], landmarks[s], landmarks[t], warp_mode)
        except DegenerateConfigurationError:
            logger.debug(f"Skipping degenerate pair ({s}, {t})")
            continue
        warped.append(img)
        labels.append(lab)
    return warped, labels


def augment_cluster(
    images: np.ndarray,
    landmarks: np.ndarray,
    cluster: int,
    router,
    trunk,
    target: int = 600,
    retry_cap: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    warp_mode: str = 'literal',
    batch: int = 64,
) -> Tuple[np.ndarray, np.ndarray, AugmentationStats]:
    """
    Grow a cluster's training set towards ``target`` samples.

    Args:
        images: ``n×40×40×3`` normalized member images
        landmarks: ``n×m×2`` member landmarks (box-normalized)
        cluster: Index of the cluster the members belong to
        router: GmmModel used for the membership test
        trunk: NetworkModel providing the router's tap features
        target: Total set size to reach (members included)
        retry_cap: Maximum candidate count (default ``20 × target``)
        rng: Generator drawing the member pairs
        warp_mode: ``literal`` or ``aligned``
        batch: Candidates routed per trunk pass

    Returns:
        (images, landmarks, stats); the originals come first, unchanged
    """
    images = np.asarray(images, dtype=np.float64)
    landmarks = np.asarray(landmarks, dtype=np.float64)
    n = len(images)
    retry_cap = 20 * target if retry_cap is None else retry_cap
    rng = rng if rng is not None else np.random.default_rng(0)
    stats = AugmentationStats(cluster=cluster, members=n, target=target)
    needed = target - n
    if needed <= 0:
        return images.copy(), landmarks.copy(), stats
    if n < 2:
        logger.warning(f"Cluster {cluster}: {n} member(s), nothing to pair for augmentation")
        return images.copy(), landmarks.copy(), stats

    new_images: List[np.ndarray] = []
    new_landmarks: List[np.ndarray] = []
    while stats.accepted < needed and stats.attempted < retry_cap:
        count = min(batch, needed - stats.accepted, retry_cap - stats.attempted)
        sources = rng.integers(n, size=count)
        # second index drawn from the other n-1 members
        targets = (sources + rng.integers(1, n, size=count)) % n
        stats.attempted += count
        warped, labels = _warp_pairs(images, landmarks, sources, targets, warp_mode)
        if not warped:
            stats.rejected += count
            continue
        routed = _route(trunk, router, np.stack(warped))
        keep = routed == cluster
        stats.rejected += count - int(keep.sum())
        stats.accepted += int(keep.sum())
        new_images.extend(w for w, k in zip(warped, keep) if k)
        new_landmarks.extend(lab for lab, k in zip(labels, keep) if k)

    if stats.shortfall:
        logger.warning(
            f"Cluster {cluster}: reached retry cap {retry_cap} with {stats.accepted} of {needed} "
            f"samples accepted (rejection rate {stats.rejection_rate:.1%})"
        )
    else:
        logger.debug(
            f"Cluster {cluster}: {stats.accepted} samples accepted from {stats.attempted} candidates"
        )
    if not new_images:
        return images.copy(), landmarks.copy(), stats
    return (
        np.concatenate([images, np.stack(new_images)], axis=0),
        np.concatenate([landmarks, np.stack(new_landmarks)], axis=0),
        stats,
    )


def measure_rejection(
    images: np.ndarray,
    landmarks: np.ndarray,
    assignments: np.ndarray,
    cluster: int,
    router,
    trunk,
    attempts: int = 200,
    rng: Optional[np.random.Generator] = None,
    warp_mode: str = 'literal',
    cross: bool = False,
) -> RejectionCheck:
    """
    Measure how often warped candidates leave ``cluster``.

    Label landmarks always come from the cluster's members. Source images
    come from the members too, or with ``cross`` from samples assigned to
    other clusters.

    Args:
        images, landmarks: The whole training set
        assignments: Cluster index of every training sample
        cluster: Cluster under test
        attempts: Number of candidates

    Returns:
        RejectionCheck
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    assignments = np.asarray(assignments)
    members = np.flatnonzero(assignments == cluster)
    pool = np.flatnonzero(assignments != cluster) if cross else members
    source = 'cross' if cross else 'same'
    if len(members) < 2 or len(pool) == 0 or attempts <= 0:
        return RejectionCheck(cluster, source, 0, 0)

    sources = pool[rng.integers(len(pool), size=attempts)]
    targets = members[rng.integers(len(members), size=attempts)]
    if not cross:
        clash = sources == targets
        while np.any(clash):
            targets[clash] = members[rng.integers(len(members), size=int(clash.sum()))]
            clash = sources == targets
    warped, _ = _warp_pairs(images, landmarks, sources, targets, warp_mode)
    if not warped:
        return RejectionCheck(cluster, source, attempts, attempts)
    routed = _route(trunk, router, np.stack(warped))
    rejected = attempts - int(np.sum(routed == cluster))
    return RejectionCheck(cluster, source, attempts, rejected)
