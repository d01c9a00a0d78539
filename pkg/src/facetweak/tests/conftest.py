"""
Shared pytest fixtures for facetweak tests.
"""
import numpy as np
import pytest
from click.testing import CliRunner

from facetweak.dataio.synth import faces_to_dataset, synth_generate
from facetweak.model.network import NetworkModel
from facetweak.netcore.layers import LayerSpec


def tiny_architecture(m: int = 5):
    """Small stack with the default layer names so every tap exists: 12x12x3 -> 2m."""
    return [
        LayerSpec('conv', 'CL1', out_channels=3, kernel=(3, 3)),
        LayerSpec('abstanh'),
        LayerSpec('maxpool', window=2, stride=2),
        LayerSpec('conv', 'CL2', out_channels=4, kernel=(2, 2)),
        LayerSpec('abstanh'),
        LayerSpec('conv', 'CL3', out_channels=4, kernel=(2, 2)),
        LayerSpec('abstanh'),
        LayerSpec('conv', 'CL4', out_channels=4, kernel=(2, 2)),
        LayerSpec('abstanh'),
        LayerSpec('dense', 'FC5', units=6),
        LayerSpec('abstanh'),
        LayerSpec('dense', 'FC6', units=2 * m),
    ]


TINY_SHAPE = (12, 12, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_network():
    """Randomly initialised tiny network on 12x12x3 inputs."""
    return NetworkModel(tiny_architecture(), input_shape=TINY_SHAPE, rng=np.random.default_rng(7))


@pytest.fixture
def default_network():
    """Default 40x40x3 architecture with seeded weights."""
    return NetworkModel(rng=np.random.default_rng(3))


@pytest.fixture(scope='session')
def synthetic_faces():
    """Sixty faces over three pose modes."""
    return synth_generate(60, 3, seed=11)


@pytest.fixture(scope='session')
def synthetic_dataset(synthetic_faces):
    """In-memory normalized dataset built from ``synthetic_faces``."""
    return faces_to_dataset(synthetic_faces)


@pytest.fixture
def run_dir(tmp_path):
    """Empty run directory."""
    path = tmp_path / "run"
    path.mkdir()
    return path


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture(scope='session')
def tiny_config_file(tmp_path_factory):
    """YAML configuration for a fast end-to-end run on a handful of faces."""
    path = tmp_path_factory.mktemp("config") / "config.yaml"
    path.write_text(
        "seed: 5\n"
        "synth:\n  n: 48\n  modes: 2\n"
        "train:\n  epochs: 3\n  patience: 2\n  batch_size: 16\n"
        "cluster:\n  k: 2\n"
        "analysis:\n  k: 3\n  taps: [input, CL4, FC5]\n  scatter_faces: 4\n"
        "augment:\n  target: 30\n  retry_factor: 2\n  rejection_attempts: 10\n"
        "tweak:\n  epochs: 2\n  patience: 1\n  validation_fraction: 0.3\n"
        "eval:\n  threshold_step: 5.0\n"
        "sweep:\n  k_values: [1, 2]\n"
    )
    return path


@pytest.fixture
def make_tiny_network():
    """Factory for tiny networks seeded per call."""
    def _make(seed: int = 0, m: int = 5) -> NetworkModel:
        return NetworkModel(tiny_architecture(m), input_shape=TINY_SHAPE, rng=np.random.default_rng(seed))
    return _make
