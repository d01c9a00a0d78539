import numpy as np
import pytest

from facetweak.config import TrainConfig
from facetweak.dataio.dataset import LandmarkDataset
from facetweak.errors import ConfigError, DataError, DivergenceError
from facetweak.model.trainer import EarlyStoppingLoop, TrainingLog, split_indices, train_vanilla
from facetweak.scoring.metrics import error_rates

TINY_SHAPE = (12, 12, 3)
TARGET = np.array([[0.33, 0.38], [0.67, 0.38], [0.5, 0.57], [0.37, 0.75], [0.63, 0.75]])


def _constant_dataset(n=40):
    """Identical images (normalized to zero) sharing one landmark set."""
    images = np.zeros((n,) + TINY_SHAPE)
    return LandmarkDataset.from_arrays(images, np.repeat(TARGET[np.newaxis], n, axis=0))


def _random_dataset(rng, n=30):
    images = rng.normal(size=(n,) + TINY_SHAPE)
    landmarks = TARGET + rng.normal(scale=0.03, size=(n, 5, 2))
    return LandmarkDataset.from_arrays(images, landmarks)


def test_split_indices_partition(rng):
    train, val = split_indices(50, 0.1, rng)
    assert len(val) == 5
    assert sorted(np.concatenate([train, val]).tolist()) == list(range(50))


def test_split_indices_minimum(rng):
    train, val = split_indices(3, 0.1, rng)
    assert len(val) == 1 and len(train) == 2
    train, val = split_indices(3, 0.1, rng, min_val=0)
    assert len(val) == 0
    with pytest.raises(ConfigError):
        split_indices(10, 1.0, rng)


def test_constant_targets_are_learned(make_tiny_network):
    config = TrainConfig(epochs=100, patience=100, batch_size=8, lr=1e-2)
    dataset = _constant_dataset()
    model, log = train_vanilla(dataset, config, seed=0, model=make_tiny_network())
    predicted = model.predict_batch(dataset.images).reshape(len(dataset), 5, 2)
    assert np.mean(error_rates(predicted, dataset.landmarks)) < 1.0
    rows = log.to_frame()
    best = rows[rows['epoch'] == log.best_epoch].iloc[0]
    assert best['train_loss'] <= rows.iloc[0]['train_loss']


def test_training_is_reproducible(make_tiny_network, rng):
    dataset = _random_dataset(rng)
    config = TrainConfig(epochs=4, patience=2, batch_size=8)
    _, log_a = train_vanilla(dataset, config, seed=3, model=make_tiny_network())
    _, log_b = train_vanilla(dataset, config, seed=3, model=make_tiny_network())
    cols = ['epoch', 'train_loss', 'val_loss']
    assert log_a.to_frame()[cols].equals(log_b.to_frame()[cols])


def test_best_snapshot_has_lowest_validation_loss(make_tiny_network, rng):
    dataset = _random_dataset(rng)
    model = make_tiny_network()
    loop = EarlyStoppingLoop(model, lr=5e-3, batch_size=8, patience=3, max_epochs=15)
    images, targets = dataset.images, dataset.landmarks
    result = loop.run(model.params, images[:24], targets[:24], images[24:], targets[24:])
    frame = result.log.to_frame()
    assert result.best_val_loss == frame['val_loss'].min()
    assert result.best_epoch == result.log.best_epoch
    assert result.epochs_run - result.best_epoch <= 3
    assert result.epochs_run <= 15
    assert loop.evaluate(result.params, images[24:], targets[24:]) == pytest.approx(result.best_val_loss)


def test_patience_zero_keeps_starting_weights(make_tiny_network, rng):
    dataset = _random_dataset(rng)
    model = make_tiny_network()
    loop = EarlyStoppingLoop(model, patience=0)
    result = loop.run(model.params, dataset.images[:20], dataset.landmarks[:20],
                      dataset.images[20:], dataset.landmarks[20:])
    assert result.epochs_run == 0
    assert len(result.log) == 1
    for a, b in zip(result.params, model.params):
        for key in a:
            np.testing.assert_array_equal(a[key], b[key])


def test_negative_patience_rejected(tiny_network):
    with pytest.raises(ConfigError):
        EarlyStoppingLoop(tiny_network, patience=-1)


def test_divergence_guard(make_tiny_network):
    """Eyes 1e-4 apart make the first batch loss exceed the guard."""
    targets = np.repeat(TARGET[np.newaxis], 10, axis=0)
    targets[:, 1] = targets[:, 0] + [1e-4, 0.0]
    dataset = LandmarkDataset.from_arrays(np.zeros((10,) + TINY_SHAPE), targets)
    with pytest.raises(DivergenceError):
        train_vanilla(dataset, TrainConfig(epochs=2, patience=1), model=make_tiny_network())


def test_empty_dataset_rejected():
    with pytest.raises(DataError):
        train_vanilla(LandmarkDataset([]), TrainConfig())


def test_training_log_roundtrip(tmp_path):
    log = TrainingLog()
    log.append(0, 1.0, 2.0, 0.1)
    log.append(1, 0.5, 1.5, 0.2)
    path = log.save(tmp_path / "log.csv")
    loaded = TrainingLog.load(path)
    assert loaded.rows == log.rows
    assert loaded.best_epoch == 1
    assert list(loaded.to_frame().columns) == ['epoch', 'train_loss', 'val_loss', 'wall_time']
