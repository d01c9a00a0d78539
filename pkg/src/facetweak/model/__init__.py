from .landmarks import LandmarkSet, batch_loss, interocular_distance, loss
from .network import TAPS, NetworkModel, default_architecture
from .trainer import EarlyStoppingLoop, TrainingLog, VanillaTrainer, split_indices, train_vanilla

__all__ = [
    "LandmarkSet",
    "batch_loss",
    "interocular_distance",
    "loss",
    "TAPS",
    "NetworkModel",
    "default_architecture",
    "EarlyStoppingLoop",
    "TrainingLog",
    "VanillaTrainer",
    "split_indices",
    "train_vanilla",
]
