"""
In-memory landmark datasets and annotation-file ingestion.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..errors import DataError
from ..model.landmarks import LandmarkSet
from ..model.trainer import split_indices
from ..utils.parallel import ordered_map
from ..utils.seeding import stream
from .annotations import AnnotationParser, AnnotationRecord
from .preprocess import NormalizationStats, crop_and_resize, normalize_landmarks, within_enlarged_box

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.json'


@dataclass
class Sample:
    """A normalized 40×40×3 crop with box-normalized landmarks."""
    image: np.ndarray
    landmarks: LandmarkSet
    attributes: Optional[np.ndarray] = None
    path: str = ''
    mode: Optional[int] = None


class LandmarkDataset:
    """Ordered collection of samples sharing one set of normalization statistics."""

    def __init__(self, samples: Sequence[Sample], stats: Optional[NormalizationStats] = None):
        self.samples: List[Sample] = list(samples)
        self.stats = stats
        self._images: Optional[np.ndarray] = None
        self._landmarks: Optional[np.ndarray] = None

    @classmethod
    def from_arrays(
        cls,
        images: np.ndarray,
        landmarks: np.ndarray,
        stats: Optional[NormalizationStats] = None,
        attributes: Optional[np.ndarray] = None,
        paths: Optional[Sequence[str]] = None,
        modes: Optional[Sequence[int]] = None,
    ) -> 'LandmarkDataset':
        samples = []
        for i in range(len(images)):
            samples.append(Sample(
                image=np.asarray(images[i], dtype=np.float64),
                landmarks=LandmarkSet(landmarks[i]),
                attributes=None if attributes is None else np.asarray(attributes[i], dtype=np.int64),
                path='' if paths is None else paths[i],
                mode=None if modes is None else int(modes[i]),
            ))
        return cls(samples, stats)

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, index: int) -> Sample:
        return self.samples[index]

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    @property
    def images(self) -> np.ndarray:
        """``N×40×40×3`` stack of normalized crops."""
        if self._images is None:
            if not self.samples:
                return np.zeros((0, 40, 40, 3))
            self._images = np.stack([s.image for s in self.samples])
        return self._images

    @property
    def landmarks(self) -> np.ndarray:
        """``N×m×2`` box-normalized landmarks."""
        if self._landmarks is None:
            if not self.samples:
                return np.zeros((0, 0, 2))
            self._landmarks = np.stack([s.landmarks.points for s in self.samples])
        return self._landmarks

    @property
    def has_attributes(self) -> bool:
        return bool(self.samples) and all(s.attributes is not None for s in self.samples)

    @property
    def attributes(self) -> Optional[np.ndarray]:
        """``N×3`` binary attributes, or None when any sample lacks them."""
        if not self.has_attributes:
            return None
        return np.stack([s.attributes for s in self.samples])

    @property
    def paths(self) -> List[str]:
        return [s.path for s in self.samples]

    @property
    def modes(self) -> Optional[np.ndarray]:
        if not self.samples or any(s.mode is None for s in self.samples):
            return None
        return np.array([s.mode for s in self.samples], dtype=np.int64)

    def subset(self, indices: Sequence[int]) -> 'LandmarkDataset':
        return LandmarkDataset([self.samples[int(i)] for i in indices], self.stats)


@dataclass
class LoadResult:
    """Outcome of ingesting an annotation file."""
    dataset: LandmarkDataset
    stats: NormalizationStats
    train_indices: np.ndarray
    val_indices: np.ndarray
    failures: List[AnnotationRecord] = field(default_factory=list)
    skipped: List[Tuple[int, str]] = field(default_factory=list)

    @property
    def train(self) -> LandmarkDataset:
        return self.dataset.subset(self.train_indices)

    @property
    def val(self) -> LandmarkDataset:
        return self.dataset.subset(self.val_indices)

    @property
    def split(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.train_indices, self.val_indices


def read_rgb(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert('RGB'), dtype=np.float64)


def _read_modes(annotation_file: Path, count: int) -> Optional[List[int]]:
    manifest = annotation_file.parent / MANIFEST_NAME
    if not manifest.exists():
        return None
    try:
        modes = json.loads(manifest.read_text(encoding='utf-8')).get('modes')
    except (OSError, json.JSONDecodeError) as e:
        logger.warning(f"Ignoring unreadable manifest {manifest}: {e}")
        return None
    if not isinstance(modes, list) or len(modes) != count:
        return None
    return [int(v) for v in modes]


def load_dataset(
    annotation_file: Union[str, Path],
    image_root: Optional[Union[str, Path]] = None,
    stats: Optional[NormalizationStats] = None,
    validation_fraction: float = 0.1,
    seed: int = 0,
    split: Optional[Tuple[Sequence[int], Sequence[int]]] = None,
    evaluate_all: bool = False,
    jobs: int = 1,
) -> LoadResult:
    """
    Read, crop and normalize every annotated face.

    Args:
        annotation_file: Annotation text file
        image_root: Directory image paths are relative to (default: the
            annotation file's directory)
        stats: Normalization statistics to apply; computed from the training
            split when omitted
        validation_fraction: Held-out share when drawing a split
        seed: Run seed; the split comes from the ``split`` stream
        split: Explicit (train, validation) indices over the kept samples
        evaluate_all: Treat every kept sample as validation (test sets)
        jobs: Worker threads for image decoding

    Returns:
        LoadResult: samples in annotation order, stats, split, detector
        failures and skipped records

    Raises:
        DataError: unparseable file or no usable record
    """
    annotation_file = Path(annotation_file)
    root = Path(image_root) if image_root is not None else annotation_file.parent
    records = AnnotationParser().parse(annotation_file)
    if not records:
        raise DataError(f"No annotation records in {annotation_file}")
    modes = _read_modes(annotation_file, len(records))

    failures = [r for r in records if r.is_failure]
    faces = [(i, r) for i, r in enumerate(records) if not r.is_failure]

    def _ingest(item):
        index, record = item
        points = normalize_landmarks(record.landmarks, record.box)
        if not within_enlarged_box(points):
            return index, record, None, points, 'landmark outside the enlarged (1.5x) box'
        try:
            pixels = read_rgb(root / record.image_path)
        except (OSError, UnidentifiedImageError) as e:
            return index, record, None, points, f'unreadable image ({e})'
        return index, record, crop_and_resize(pixels, record.box), points, None

    crops, kept, skipped = [], [], []
    for index, record, crop, points, reason in ordered_map(_ingest, faces, jobs=jobs):
        if reason is not None:
            logger.warning(f"Skipping {annotation_file.name}:{record.line_number} ({record.image_path}): {reason}")
            skipped.append((record.line_number, reason))
            continue
        crops.append(crop)
        kept.append((index, record, points))
    if not kept:
        raise DataError(f"No usable faces in {annotation_file}")

    n = len(kept)
    if evaluate_all:
        train_idx, val_idx = np.zeros(0, dtype=np.int64), np.arange(n)
    elif split is not None:
        train_idx, val_idx = (np.asarray(s, dtype=np.int64) for s in split)
        if np.any(np.concatenate([train_idx, val_idx]) >= n):
            raise DataError(f"Split indices exceed the {n} samples of {annotation_file}")
    else:
        if n < 2:
            raise DataError(f"{annotation_file} has a single usable face; a validation split needs two")
        train_idx, val_idx = split_indices(n, validation_fraction, stream(seed, 'split'))

    raw = np.stack(crops)
    if stats is None:
        source = raw[train_idx] if len(train_idx) else raw
        stats = NormalizationStats.from_images(source)
    images = stats.normalize(raw)

    samples = []
    for (index, record, points), image in zip(kept, images):
        samples.append(Sample(
            image=image,
            landmarks=LandmarkSet(points),
            attributes=None if record.attributes is None else np.array(record.attributes, dtype=np.int64),
            path=record.image_path,
            mode=None if modes is None else modes[index],
        ))
    logger.info(
        f"Loaded {n} faces from {annotation_file} ({len(failures)} detector failures, {len(skipped)} skipped)"
    )
    return LoadResult(LandmarkDataset(samples, stats), stats, train_idx, val_idx, failures, skipped)
