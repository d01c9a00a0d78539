"""
The landmark-regression network: a feed-forward conv/dense stack with
explicit forward and backward passes and feature taps at layer inputs.
"""
import copy
from collections import OrderedDict
import itertools
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import BackwardError, ConfigError, ShapeError
from ..netcore import container
from ..netcore.layers import Layer, LayerSpec, Params, build_layers
from .landmarks import DEFAULT_M, LandmarkSet

if TYPE_CHECKING:
    from ..dataio.preprocess import NormalizationStats

logger = logging.getLogger(__name__)

IMAGE_SIZE = 40
IMAGE_SHAPE = (IMAGE_SIZE, IMAGE_SIZE, 3)
# Feature taps name the layer whose *input* is extracted; 'input' and 'CL1'
# both denote the normalized image.
TAPS = ('input', 'CL1', 'CL2', 'CL3', 'CL4', 'FC5')
HEAD_TAPS = ('CL4', 'FC5')
INFERENCE_CHUNK = 256

_tokens = itertools.count(1)


def default_architecture(m: int = DEFAULT_M) -> List[LayerSpec]:
    """CL1..CL4 with pooling after the first three, FC5 (100 units) and a 2m linear output."""
    return [
        LayerSpec('conv', 'CL1', out_channels=16, kernel=(5, 5)),
        LayerSpec('abstanh'),
        LayerSpec('maxpool', window=2, stride=2),
        LayerSpec('conv', 'CL2', out_channels=48, kernel=(3, 3)),
        LayerSpec('abstanh'),
        LayerSpec('maxpool', window=2, stride=2),
        LayerSpec('conv', 'CL3', out_channels=64, kernel=(3, 3)),
        LayerSpec('abstanh'),
        LayerSpec('maxpool', window=2, stride=2),
        LayerSpec('conv', 'CL4', out_channels=64, kernel=(2, 2)),
        LayerSpec('abstanh'),
        LayerSpec('dense', 'FC5', units=100),
        LayerSpec('abstanh'),
        LayerSpec('dense', 'FC6', units=2 * m),
    ]


@dataclass
class ForwardTrace:
    """Intermediates retained by a forward pass, consumed by ``backward``."""
    token: int
    start: int
    caches: List[Any]
    output_shape: Tuple[int, ...]


class NetworkModel:
    """Ordered layer stack, its parameters and the normalization statistics."""

    def __init__(
        self,
        specs: Optional[Sequence[LayerSpec]] = None,
        input_shape: Tuple[int, ...] = IMAGE_SHAPE,
        params: Optional[List[Params]] = None,
        stats: Optional['NormalizationStats'] = None,
        rng: Optional[np.random.Generator] = None,
    ):
        self.specs = list(specs) if specs is not None else default_architecture()
        self.input_shape = tuple(input_shape)
        self.layers: List[Layer] = build_layers(self.specs, self.input_shape)
        if self.layers[-1].spec.kind != 'dense':
            raise ConfigError("The output layer must be dense")
        if params is None:
            rng = rng if rng is not None else np.random.default_rng(0)
            params = [layer.init_params(rng) for layer in self.layers]
        self._check_params(params)
        self.params = params
        self.stats = stats
        self._token = next(_tokens)
        self.logger = logging.getLogger(__name__)

    def _check_params(self, params: List[Params]) -> None:
        if len(params) != len(self.layers):
            raise ShapeError(f"{len(params)} parameter sets for {len(self.layers)} layers")
        for layer, p in zip(self.layers, params):
            expected = layer.param_shapes()
            got = {k: tuple(v.shape) for k, v in p.items()}
            if got != expected:
                raise ShapeError(f"Layer {layer.name or layer.spec.kind}: parameters {got}, expected {expected}")

    # ------------------------------------------------------------ structure

    @property
    def m(self) -> int:
        return self.layers[-1].output_shape[0] // 2

    @property
    def output_size(self) -> int:
        return self.layers[-1].output_shape[0]

    def layer_index(self, name: str) -> int:
        for i, layer in enumerate(self.layers):
            if layer.name == name:
                return i
        raise ConfigError(f"No layer named {name!r}")

    def tap_index(self, tap: str) -> int:
        """Index of the layer whose input the tap extracts."""
        if tap not in TAPS:
            raise ConfigError(f"Unknown feature tap {tap!r}; expected one of {', '.join(TAPS)}")
        if tap in ('input', 'CL1'):
            return 0
        return self.layer_index(tap)

    def tap_shape(self, tap: str) -> Tuple[int, ...]:
        return self.layers[self.tap_index(tap)].input_shape

    def feature_size(self, tap: str) -> int:
        return int(np.prod(self.tap_shape(tap)))

    # ------------------------------------------------------------ passes

    def forward(
        self,
        x: np.ndarray,
        start: int = 0,
        stop: Optional[int] = None,
        params: Optional[List[Params]] = None,
        keep_trace: bool = False,
    ) -> Tuple[np.ndarray, Optional[ForwardTrace]]:
        """
        Run layers ``start`` up to (excluding) ``stop`` on a batch.

        Args:
            x: Batch shaped ``N × input-shape-of-layer-start``
            start: First layer index
            stop: End layer index (default: end of stack)
            params: Parameter sets for layers ``start..stop``; default: the model's own
            keep_trace: Retain intermediates for ``backward``

        Returns:
            (output, trace or None)
        """
        stop = len(self.layers) if stop is None else stop
        layers = self.layers[start:stop]
        params = params if params is not None else self.params[start:stop]
        if len(params) != len(layers):
            raise ShapeError(f"{len(params)} parameter sets for {len(layers)} layers")
        expected = self.layers[start].input_shape if layers else None
        x = np.asarray(x, dtype=np.float64)
        if expected is not None and tuple(x.shape[1:]) != tuple(expected):
            x = x.reshape((x.shape[0],) + tuple(expected))
        caches = []
        for layer, p in zip(layers, params):
            x, cache = layer.forward(x, p)
            if keep_trace:
                caches.append(cache)
        trace = ForwardTrace(self._token, start, caches, x.shape) if keep_trace else None
        return x, trace

    def backward(
        self,
        trace: Optional[ForwardTrace],
        dy: np.ndarray,
        params: Optional[List[Params]] = None,
    ) -> Tuple[np.ndarray, List[Params]]:
        """
        Reverse-mode pass over the layers recorded in ``trace``.

        Returns:
            (gradient w.r.t. the traced input, per-layer parameter gradients)

        Raises:
            BackwardError: no trace, a trace from another model, or a gradient
                that does not match the traced output
        """
        if trace is None or not trace.caches:
            raise BackwardError("backward() requires the trace of a preceding forward pass")
        if trace.token != self._token:
            raise BackwardError("Trace was produced by a different model")
        if tuple(dy.shape) != tuple(trace.output_shape):
            raise BackwardError(f"Gradient shape {dy.shape} does not match forward output {trace.output_shape}")
        stop = trace.start + len(trace.caches)
        params = params if params is not None else self.params[trace.start:stop]
        grads: List[Params] = [None] * len(trace.caches)
        for i in range(len(trace.caches) - 1, -1, -1):
            layer = self.layers[trace.start + i]
            dy, grads[i] = layer.backward(trace.caches[i], dy, params[i])
        return dy, grads

    # ------------------------------------------------------------ inference

    def _batched(self, images: np.ndarray) -> np.ndarray:
        images = np.asarray(images, dtype=np.float64)
        if images.shape == self.input_shape:
            images = images[np.newaxis]
        if tuple(images.shape[1:]) != self.input_shape:
            raise ShapeError(f"Expected images shaped N×{self.input_shape}, got {images.shape}")
        return images

    def predict_batch(self, images: np.ndarray) -> np.ndarray:
        """Raw ``N×2m`` outputs for a batch of normalized images."""
        images = self._batched(images)
        outputs = [self.forward(images[i:i + INFERENCE_CHUNK])[0]
                   for i in range(0, len(images), INFERENCE_CHUNK)]
        return np.concatenate(outputs, axis=0) if outputs else np.zeros((0, self.output_size))

    def predict(self, sample) -> LandmarkSet:
        """Predicted landmarks for one sample (or normalized image); no clamping."""
        image = getattr(sample, 'image', sample)
        return LandmarkSet.from_vector(self.predict_batch(image)[0])

    def extract_features_batch(self, images: np.ndarray, tap: str = 'FC5') -> np.ndarray:
        """Flattened activations entering layer ``tap``, one row per image."""
        index = self.tap_index(tap)
        images = self._batched(images)
        chunks = []
        for i in range(0, len(images), INFERENCE_CHUNK):
            act, _ = self.forward(images[i:i + INFERENCE_CHUNK], stop=index)
            chunks.append(act.reshape(act.shape[0], -1))
        if not chunks:
            return np.zeros((0, self.feature_size(tap)))
        return np.concatenate(chunks, axis=0)

    def extract_features(self, sample, tap: str = 'FC5') -> np.ndarray:
        """Feature vector of one sample at ``tap``."""
        image = getattr(sample, 'image', sample)
        return self.extract_features_batch(image, tap)[0]

    # ------------------------------------------------------------ heads

    def head_params(self, tap: str = 'FC5') -> List[Params]:
        """Deep copy of every parameter set from the tap layer to the output."""
        return copy.deepcopy(self.params[self.tap_index(tap):])

    def forward_head(
        self, features: np.ndarray, tap: str, head: Optional[List[Params]] = None, keep_trace: bool = False
    ) -> Tuple[np.ndarray, Optional[ForwardTrace]]:
        """Run the layers from ``tap`` to the output on tap features."""
        index = self.tap_index(tap)
        feats = np.asarray(features, dtype=np.float64)
        if feats.ndim == 1:
            feats = feats[np.newaxis]
        return self.forward(feats, start=index, params=head, keep_trace=keep_trace)

    # ------------------------------------------------------------ persistence

    def copy(self) -> 'NetworkModel':
        return NetworkModel(self.specs, self.input_shape, copy.deepcopy(self.params), self.stats)

    def to_container(self) -> container.Container:
        tensors = OrderedDict()
        for i, (layer, p) in enumerate(zip(self.layers, self.params)):
            for key in sorted(p):
                tensors[f"layer{i:02d}/{key}"] = p[key]
        if self.stats is not None:
            tensors['norm/mean'] = self.stats.mean
            tensors['norm/std'] = self.stats.std
        metadata = {
            'architecture': [s.to_dict() for s in self.specs],
            'input_shape': list(self.input_shape),
        }
        return container.Container(kind='network', metadata=metadata, tensors=tensors)

    @classmethod
    def from_container(cls, box: container.Container) -> 'NetworkModel':
        from ..dataio.preprocess import NormalizationStats

        specs = [LayerSpec.from_dict(d) for d in box.metadata['architecture']]
        input_shape = tuple(box.metadata['input_shape'])
        layers = build_layers(specs, input_shape)
        params: List[Params] = []
        for i, layer in enumerate(layers):
            params.append({k: box.tensors[f"layer{i:02d}/{k}"] for k in layer.param_shapes()})
        stats = None
        if 'norm/mean' in box.tensors:
            stats = NormalizationStats(mean=box.tensors['norm/mean'], std=box.tensors['norm/std'])
        return cls(specs, input_shape, params, stats)

    def to_bytes(self) -> bytes:
        return container.to_bytes(self.to_container())

    def save(self, path: Union[str, Path]) -> Path:
        return container.save(self.to_container(), path)

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'NetworkModel':
        return cls.from_container(container.load(path, expected_kind='network'))

    def describe(self) -> List[Dict[str, Any]]:
        """Per-layer summary rows (name, kind, input shape, output shape, parameter count)."""
        rows = []
        for layer, p in zip(self.layers, self.params):
            rows.append({
                'name': layer.name or '',
                'kind': layer.spec.kind,
                'input_shape': 'x'.join(map(str, layer.input_shape)),
                'output_shape': 'x'.join(map(str, layer.output_shape)),
                'parameters': int(sum(v.size for v in p.values())),
            })
        return rows
