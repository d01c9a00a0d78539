__version__ = "0.1.0"

from .augment import SimilarityTransform, augment_cluster, estimate_similarity, warp_image
from .clustering import GmmModel, assign, fit
from .config import RunConfig, load_config
from .dataio import LandmarkDataset, load_dataset, mirror_sample, synth_generate
from .model import LandmarkSet, NetworkModel, loss, train_vanilla
from .tweak import TweakedModel, build_tweaked, predict_tweaked, route

__all__ = [
    "SimilarityTransform",
    "augment_cluster",
    "estimate_similarity",
    "warp_image",
    "GmmModel",
    "assign",
    "fit",
    "RunConfig",
    "load_config",
    "LandmarkDataset",
    "load_dataset",
    "mirror_sample",
    "synth_generate",
    "LandmarkSet",
    "NetworkModel",
    "loss",
    "train_vanilla",
    "TweakedModel",
    "build_tweaked",
    "predict_tweaked",
    "route",
]
