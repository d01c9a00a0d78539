from .annotations import AnnotationParser, AnnotationRecord
from .dataset import LandmarkDataset, LoadResult, Sample, load_dataset
from .mirror import mirror_images, mirror_landmark_array, mirror_landmarks, mirror_normalized, mirror_sample
from .preprocess import NormalizationStats, crop_and_resize, denormalize_landmarks, normalize_landmarks
from .synth import faces_to_dataset, synth_generate, write_synthetic_dataset

__all__ = [
    "AnnotationParser",
    "AnnotationRecord",
    "LandmarkDataset",
    "LoadResult",
    "Sample",
    "load_dataset",
    "mirror_images",
    "mirror_landmark_array",
    "mirror_landmarks",
    "mirror_normalized",
    "mirror_sample",
    "NormalizationStats",
    "crop_and_resize",
    "denormalize_landmarks",
    "normalize_landmarks",
    "faces_to_dataset",
    "synth_generate",
    "write_synthetic_dataset",
]
