"""
Per-cluster tweaked heads over a frozen trunk.

The vanilla network's layers up to the tap stay fixed. A mixture fitted on
the tap features routes every sample to one cluster, and each cluster gets
its own copy of the layers from the tap to the output, fine-tuned on that
cluster's (augmented) samples with early stopping.
"""
import copy
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..augment.cluster_augmenter import AugmentationStats, RejectionCheck, augment_cluster, measure_rejection
from ..clustering.gmm import GmmModel, fit as fit_gmm
from ..config import AugmentConfig, ClusterConfig, TrainConfig, TweakConfig
from ..dataio.mirror import mirror_landmark_array, mirror_normalized
from ..errors import ConfigError, ContainerFormatError, DataError, MissingArtifactError
from ..exporters.json_exporter import JSONExporter
from ..model.landmarks import LandmarkSet
from ..model.network import HEAD_TAPS, NetworkModel
from ..model.trainer import EarlyStoppingLoop, TrainingLog, split_indices
from ..netcore import container
from ..netcore.layers import Params
from ..utils.file_utils import ensure_dir
from ..utils.parallel import ordered_map
from ..utils.seeding import stream

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.json'
TRUNK_NAME = 'trunk.ftw'
ROUTER_NAME = 'router.ftw'
MIN_HEAD_VALIDATION = 2


def head_file_name(cluster: int) -> str:
    return f"head_{cluster:03d}.ftw"


@dataclass
class HeadReport:
    """How one head was trained."""
    cluster: int
    members: int
    train_size: int
    val_size: int
    fallback: bool = False
    best_epoch: int = 0
    epochs_run: int = 0
    best_val_loss: float = float('nan')
    log: Optional[TrainingLog] = field(default=None, repr=False)
    augmentation: Optional[AugmentationStats] = None
    rejection_checks: List[RejectionCheck] = field(default_factory=list)

    def to_row(self) -> Dict:
        return {
            'cluster': self.cluster,
            'members': self.members,
            'train_size': self.train_size,
            'val_size': self.val_size,
            'fallback': int(self.fallback),
            'best_epoch': self.best_epoch,
            'epochs_run': self.epochs_run,
            'best_val_loss': self.best_val_loss,
        }


class TweakedModel:
    """
    A frozen trunk, a router and one head per cluster.

    ``heads[k]`` holds parameter sets for every layer from the tap to the
    output, shaped exactly like the trunk's own.
    """

    def __init__(
        self,
        trunk: NetworkModel,
        router: GmmModel,
        heads: Sequence[List[Params]],
        reports: Optional[Sequence[HeadReport]] = None,
    ):
        if router.tap not in HEAD_TAPS:
            raise ConfigError(f"Heads start at one of {', '.join(HEAD_TAPS)}, not {router.tap!r}")
        if len(heads) != router.k:
            raise DataError(f"{len(heads)} heads for a {router.k}-component router")
        self.trunk = trunk
        self.router = router
        self.tap = router.tap
        self.start = trunk.tap_index(self.tap)
        self.heads = [list(h) for h in heads]
        self.reports = list(reports or [])
        self.logger = logging.getLogger(__name__)
        reference = trunk.params[self.start:]
        for k, head in enumerate(self.heads):
            if len(head) != len(reference) or any(
                set(h) != set(r) or any(h[key].shape != r[key].shape for key in r)
                for h, r in zip(head, reference)
            ):
                raise DataError(f"Head {k} does not match the trunk's layer shapes from {self.tap}")

    @property
    def k(self) -> int:
        return self.router.k

    @property
    def stats(self):
        return self.trunk.stats

    def features(self, images: np.ndarray) -> np.ndarray:
        return self.trunk.extract_features_batch(images, tap=self.tap)

    def route_batch(self, images: np.ndarray) -> np.ndarray:
        """Cluster index of each image."""
        labels, _ = self.router.assign_many(self.features(images))
        return labels

    def _predict_once(self, images: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        feats = self.features(images)
        labels, _ = self.router.assign_many(feats)
        out = np.zeros((len(feats), self.trunk.output_size))
        for k in np.unique(labels):
            idx = np.flatnonzero(labels == k)
            out[idx], _ = self.trunk.forward_head(feats[idx], self.tap, self.heads[int(k)])
        return out.reshape(len(feats), -1, 2), labels

    def predict_batch(self, images: np.ndarray, mirror: bool = False) -> Tuple[np.ndarray, np.ndarray]:
        """
        Landmarks for a batch of normalized images.

        With ``mirror`` each image is also predicted flipped (routed on its
        own), the flipped prediction is mirrored back and both are averaged.

        Returns:
            (``N×m×2`` landmarks, cluster of each unflipped image)
        """
        points, labels = self._predict_once(images)
        if mirror:
            flipped, _ = self._predict_once(mirror_normalized(images, self.stats))
            points = 0.5 * (points + mirror_landmark_array(flipped))
        return points, labels

    # ------------------------------------------------------------ persistence

    def head_container(self, cluster: int) -> container.Container:
        tensors = OrderedDict()
        for i, p in enumerate(self.heads[cluster]):
            for key in sorted(p):
                tensors[f"layer{self.start + i:02d}/{key}"] = p[key]
        metadata = {'cluster': cluster, 'tap': self.tap, 'start': self.start}
        return container.Container(kind='head', metadata=metadata, tensors=tensors)

    def save(self, directory: Union[str, Path]) -> Path:
        """Write trunk, router, one container per head and ``manifest.json``."""
        directory = ensure_dir(directory)
        self.trunk.save(directory / TRUNK_NAME)
        self.router.save(directory / ROUTER_NAME)
        for k in range(self.k):
            container.save(self.head_container(k), directory / head_file_name(k))
        manifest = {
            'heads': [head_file_name(k) for k in range(self.k)],
            'k': self.k,
            'm': self.trunk.m,
            'router': ROUTER_NAME,
            'tap': self.tap,
            'trunk': TRUNK_NAME,
        }
        JSONExporter().export(manifest, str(directory / MANIFEST_NAME))
        self.logger.info(f"Saved tweaked model with {self.k} heads to {directory}")
        return directory

    @classmethod
    def load(cls, directory: Union[str, Path]) -> 'TweakedModel':
        directory = Path(directory)
        if not (directory / MANIFEST_NAME).exists():
            raise MissingArtifactError(directory / MANIFEST_NAME, 'tweak')
        manifest = JSONExporter.load(directory / MANIFEST_NAME)
        trunk = NetworkModel.load(directory / manifest['trunk'])
        router = GmmModel.load(directory / manifest['router'])
        start = trunk.tap_index(manifest['tap'])
        heads = []
        for name in manifest['heads']:
            box = container.load(directory / name, expected_kind='head')
            head = []
            for i, layer in enumerate(trunk.layers[start:], start=start):
                try:
                    head.append({key: box.tensors[f"layer{i:02d}/{key}"] for key in layer.param_shapes()})
                except KeyError as e:
                    raise ContainerFormatError(f"{name} lacks tensor {e}") from e
            heads.append(head)
        return cls(trunk, router, heads)


def route(model: TweakedModel, sample) -> int:
    """Cluster a sample (or normalized image) is routed to."""
    image = np.asarray(getattr(sample, 'image', sample), dtype=np.float64)
    if image.ndim == 3:
        image = image[np.newaxis]
    return int(model.route_batch(image)[0])


def predict_tweaked(model: TweakedModel, sample, mirror: bool = True) -> LandmarkSet:
    """Landmarks of one sample, optionally averaged with its mirrored prediction."""
    image = np.asarray(getattr(sample, 'image', sample), dtype=np.float64)
    points, _ = model.predict_batch(image[np.newaxis], mirror=mirror)
    return LandmarkSet(points[0])


class TweakBuilder:
    """Fits the router if needed and trains one head per cluster."""

    def __init__(
        self,
        tweak: Optional[TweakConfig] = None,
        augment: Optional[AugmentConfig] = None,
        train: Optional[TrainConfig] = None,
        cluster: Optional[ClusterConfig] = None,
        seed: int = 0,
        jobs: int = 1,
    ):
        self.tweak = tweak or TweakConfig()
        self.augment = augment or AugmentConfig(enabled=False)
        self.train = train or TrainConfig()
        self.cluster = cluster or ClusterConfig()
        for cfg in (self.tweak, self.augment, self.train, self.cluster):
            cfg.validate()
        self.seed = seed
        self.jobs = jobs
        self.logger = logging.getLogger(__name__)

    def _train_head(self, vanilla, router, images, targets, features, assignments, cluster) -> Tuple[List[Params], HeadReport]:
        tap = router.tap
        start = vanilla.tap_index(tap)
        init = vanilla.head_params(tap)
        members = np.flatnonzero(assignments == cluster)
        rng = stream(self.seed, 'tweak', cluster)
        train_local, val_local = split_indices(
            len(members), self.tweak.validation_fraction, rng, min_val=0
        ) if len(members) else (np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))
        train_idx, val_idx = members[train_local], members[val_local]
        report = HeadReport(cluster, len(members), len(train_idx), len(val_idx))

        if len(val_idx) < MIN_HEAD_VALIDATION or len(train_idx) == 0:
            self.logger.warning(
                f"Head {cluster}: {len(members)} members, {len(val_idx)} validation samples; "
                f"keeping vanilla weights"
            )
            report.fallback = True
            return init, report

        train_x, train_y = features[train_idx], targets[train_idx]
        aug = self.augment
        if aug.enabled:
            aug_images, aug_targets, report.augmentation = augment_cluster(
                images[train_idx], targets[train_idx], cluster, router, vanilla,
                target=aug.target, retry_cap=aug.retry_cap, rng=stream(self.seed, 'augment', cluster),
                warp_mode=aug.warp_mode, batch=aug.candidate_batch,
            )
            extra = len(aug_images) - len(train_idx)
            if extra:
                added = vanilla.extract_features_batch(aug_images[len(train_idx):], tap=tap)
                train_x = np.concatenate([train_x, added], axis=0)
                train_y = aug_targets
            if aug.rejection_attempts:
                check_rng = stream(self.seed, 'rejection', cluster)
                report.rejection_checks = [
                    measure_rejection(images, targets, assignments, cluster, router, vanilla,
                                      attempts=aug.rejection_attempts, rng=check_rng,
                                      warp_mode=aug.warp_mode, cross=cross)
                    for cross in (False, True)
                ]
        report.train_size = len(train_x)

        loop = EarlyStoppingLoop(
            vanilla,
            start=start,
            lr=self.train.lr * self.tweak.lr_scale,
            batch_size=self.tweak.batch_size,
            patience=self.tweak.patience,
            max_epochs=self.tweak.epochs,
            rng=rng,
            beta1=self.train.beta1,
            beta2=self.train.beta2,
            epsilon=self.train.epsilon,
            label=f"head {cluster}",
        )
        result = loop.run(init, train_x, train_y, features[val_idx], targets[val_idx])
        report.best_epoch = result.best_epoch
        report.epochs_run = result.epochs_run
        report.best_val_loss = result.best_val_loss
        report.log = result.log
        return result.params, report

    def build(
        self,
        vanilla: NetworkModel,
        dataset,
        k: Optional[int] = None,
        router: Optional[GmmModel] = None,
    ) -> TweakedModel:
        """
        Args:
            vanilla: Trained network; never modified
            dataset: Training set with ``images`` and ``landmarks``
            k: Cluster count when no router is given (default ``cluster.k``)
            router: Mixture already fitted on the tap features

        Returns:
            TweakedModel whose trunk is a copy of ``vanilla``
        """
        tap = router.tap if router is not None else self.cluster.tap
        if tap not in HEAD_TAPS:
            raise ConfigError(f"Tweaking needs a head tap in {', '.join(HEAD_TAPS)}, got {tap!r}")
        images = np.asarray(dataset.images, dtype=np.float64)
        targets = np.asarray(dataset.landmarks, dtype=np.float64)
        if len(images) == 0:
            raise DataError("Cannot tweak on an empty dataset")
        trunk = vanilla.copy()
        features = trunk.extract_features_batch(images, tap=tap)
        if router is None:
            k = self.cluster.k if k is None else k
            router = fit_gmm(
                features, k, seed=self.seed, tap=tap, max_iter=self.cluster.max_iter,
                tol=self.cluster.tol, jobs=self.jobs,
            ).model
        assignments, _ = router.assign_many(features)
        self.logger.info(f"Tweaking {router.k} heads from {tap} on {len(images)} samples")

        results = ordered_map(
            lambda c: self._train_head(trunk, router, images, targets, features, assignments, c),
            range(router.k),
            jobs=self.jobs,
        )
        heads = [copy.deepcopy(params) for params, _ in results]
        return TweakedModel(trunk, router, heads, [report for _, report in results])


def build_tweaked(
    vanilla: NetworkModel,
    dataset,
    k: Optional[int] = None,
    tweak: Optional[TweakConfig] = None,
    augment: Optional[AugmentConfig] = None,
    train: Optional[TrainConfig] = None,
    cluster: Optional[ClusterConfig] = None,
    router: Optional[GmmModel] = None,
    seed: int = 0,
    jobs: int = 1,
) -> TweakedModel:
    """Build a tweaked model; see ``TweakBuilder.build``. Augmentation is off unless configured."""
    return TweakBuilder(tweak, augment, train, cluster, seed, jobs).build(vanilla, dataset, k=k, router=router)
