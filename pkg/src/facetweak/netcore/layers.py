"""
Differentiable layers for small feed-forward conv/dense stacks.

Activations are channels-last float64 arrays. Every function accepts a single
sample (``H×W×C`` or ``n``) or a batch with a leading sample axis
(``N×H×W×C`` or ``N×n``) and returns the same rank it was given.
Convolution is valid-padding cross-correlation; pooling windows that run past
an odd border are truncated, never padded with fabricated values.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ConfigError, ShapeError

LAYER_KINDS = ('conv', 'maxpool', 'abstanh', 'dense')

Params = Dict[str, np.ndarray]


def _as_batch(x: np.ndarray, rank: int) -> Tuple[np.ndarray, bool]:
    """Add a leading sample axis when ``x`` is a single sample."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == rank - 1:
        return x[np.newaxis], True
    if x.ndim != rank:
        raise ShapeError(
            f"Expected a {rank - 1}-D sample or {rank}-D batch, got shape {x.shape}"
        )
    return x, False


# ---------------------------------------------------------------- convolution

def _im2col(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    n, h, w, c = x.shape
    ho, wo = h - kh + 1, w - kw + 1
    windows = sliding_window_view(x, (kh, kw), axis=(1, 2))
    # (n, ho, wo, c, kh, kw) -> rows ordered (kh, kw, c) to match kernel layout
    return windows.transpose(0, 1, 2, 4, 5, 3).reshape(n * ho * wo, kh * kw * c)


def _check_conv(x: np.ndarray, kernels: np.ndarray, bias: np.ndarray) -> None:
    if kernels.ndim != 4:
        raise ShapeError(f"Kernels must be Cout×kh×kw×Cin, got shape {kernels.shape}")
    cout, kh, kw, cin = kernels.shape
    _, h, w, c = x.shape
    if c != cin:
        raise ShapeError(f"Input has {c} channels but kernels expect {cin}")
    if h < kh or w < kw:
        raise ShapeError(f"Input {h}×{w} is smaller than kernel {kh}×{kw}")
    if bias.shape != (cout,):
        raise ShapeError(f"Bias must have shape ({cout},), got {bias.shape}")


def conv_forward(
    x: np.ndarray, kernels: np.ndarray, bias: np.ndarray, return_cols: bool = False
):
    """
    Valid-padding cross-correlation.

    Args:
        x: Input ``H×W×Cin`` (or ``N×H×W×Cin``)
        kernels: ``Cout×kh×kw×Cin``
        bias: ``Cout``
        return_cols: Also return the im2col matrix for reuse in backward

    Returns:
        Output ``(H−kh+1)×(W−kw+1)×Cout`` (batched if the input was)
    """
    xb, single = _as_batch(x, 4)
    kernels = np.asarray(kernels, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    _check_conv(xb, kernels, bias)
    cout, kh, kw, _ = kernels.shape
    n, h, w, _ = xb.shape
    cols = _im2col(xb, kh, kw)
    y = cols @ kernels.reshape(cout, -1).T + bias
    y = y.reshape(n, h - kh + 1, w - kw + 1, cout)
    if single:
        y = y[0]
    return (y, cols) if return_cols else y


def conv_backward(
    x: np.ndarray,
    kernels: np.ndarray,
    dy: np.ndarray,
    cols: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Gradients of a valid cross-correlation.

    Returns:
        (dx, dkernels, dbias)
    """
    xb, single = _as_batch(x, 4)
    dyb, _ = _as_batch(dy, 4)
    cout, kh, kw, cin = kernels.shape
    n, h, w, _ = xb.shape
    ho, wo = h - kh + 1, w - kw + 1
    if dyb.shape != (n, ho, wo, cout):
        raise ShapeError(f"Upstream gradient {dyb.shape} does not match output {(n, ho, wo, cout)}")
    if cols is None:
        cols = _im2col(xb, kh, kw)
    dy_mat = dyb.reshape(-1, cout)
    dkernels = (dy_mat.T @ cols).reshape(kernels.shape)
    dbias = dy_mat.sum(axis=0)
    dcols = (dy_mat @ kernels.reshape(cout, -1)).reshape(n, ho, wo, kh, kw, cin)
    dx = np.zeros_like(xb)
    for i in range(kh):
        for j in range(kw):
            dx[:, i:i + ho, j:j + wo, :] += dcols[:, :, :, i, j, :]
    if single:
        dx = dx[0]
    return dx, dkernels, dbias


# ---------------------------------------------------------------- max pooling

def _pool_extent(size: int, window: int, stride: int) -> int:
    return -(-(size - window) // stride) + 1


def maxpool_forward(
    x: np.ndarray, window: int = 2, stride: int = 2
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Max pooling with truncated trailing windows.

    Args:
        x: Input ``H×W×C`` (or batched)
        window: Window extent
        stride: Step between windows (must not exceed ``window``)

    Returns:
        (output, argmax) where argmax holds, per output cell, the flat
        ``row * W + col`` index of the winning input position
    """
    xb, single = _as_batch(x, 4)
    if window < 1 or stride < 1 or stride > window:
        raise ShapeError(f"Unsupported pooling window={window} stride={stride}")
    n, h, w, c = xb.shape
    if h < window or w < window:
        raise ShapeError(f"Input {h}×{w} is smaller than pooling window {window}")
    ho, wo = _pool_extent(h, window, stride), _pool_extent(w, window, stride)
    ph, pw = (ho - 1) * stride + window, (wo - 1) * stride + window
    padded = np.full((n, ph, pw, c), -np.inf)
    padded[:, :h, :w, :] = xb
    windows = sliding_window_view(padded, (window, window), axis=(1, 2))
    windows = windows[:, ::stride, ::stride].reshape(n, ho, wo, c, window * window)
    winner = windows.argmax(axis=-1)
    y = np.take_along_axis(windows, winner[..., np.newaxis], axis=-1)[..., 0]
    rows = np.arange(ho)[None, :, None, None] * stride + winner // window
    cols = np.arange(wo)[None, None, :, None] * stride + winner % window
    argmax = rows * w + cols
    if single:
        return y[0], argmax[0]
    return y, argmax


def maxpool_backward(
    dy: np.ndarray, argmax: np.ndarray, input_shape: Tuple[int, ...]
) -> np.ndarray:
    """Route each upstream gradient entry to its argmax input position."""
    dyb, single = _as_batch(dy, 4)
    argb = np.asarray(argmax)
    if single:
        argb = argb[np.newaxis]
    shape = tuple(input_shape)
    if len(shape) == 3:
        shape = (1,) + shape
    n, h, w, c = shape
    if argb.shape != dyb.shape:
        raise ShapeError(f"Argmax map {argb.shape} does not match gradient {dyb.shape}")
    plane = h * w
    base = (np.arange(n)[:, None, None, None] * c + np.arange(c)[None, None, None, :]) * plane
    flat_index = (base + argb).ravel()
    dx = np.bincount(flat_index, weights=dyb.ravel(), minlength=n * c * plane)
    dx = dx.reshape(n, c, h, w).transpose(0, 2, 3, 1)
    return dx[0] if single else dx


# ---------------------------------------------------------------- activation

def abstanh(x: np.ndarray) -> np.ndarray:
    """Elementwise absolute hyperbolic tangent, ``|tanh(x)|``."""
    return np.abs(np.tanh(np.asarray(x, dtype=np.float64)))


def abstanh_backward(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Gradient of ``|tanh(x)|``; the subgradient at exactly 0 is 0."""
    t = np.tanh(np.asarray(x, dtype=np.float64))
    return dy * np.sign(t) * (1.0 - t * t)


# ---------------------------------------------------------------- dense

def dense_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """
    Fully connected layer, ``weights · x + bias``.

    Args:
        x: Input vector ``n`` (or ``N×n``)
        weights: ``m×n``
        bias: ``m``
    """
    xb, single = _as_batch(x, 2)
    weights = np.asarray(weights, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if weights.ndim != 2 or xb.shape[1] != weights.shape[1]:
        raise ShapeError(
            f"Input length {xb.shape[1]} does not match weights {weights.shape}"
        )
    if bias.shape != (weights.shape[0],):
        raise ShapeError(f"Bias must have shape ({weights.shape[0]},), got {bias.shape}")
    y = xb @ weights.T + bias
    return y[0] if single else y


def dense_backward(
    x: np.ndarray, weights: np.ndarray, dy: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dweights, dbias)."""
    xb, single = _as_batch(x, 2)
    dyb, _ = _as_batch(dy, 2)
    if dyb.shape != (xb.shape[0], weights.shape[0]):
        raise ShapeError(f"Upstream gradient {dyb.shape} does not match output")
    dx = dyb @ weights
    return (dx[0] if single else dx), dyb.T @ xb, dyb.sum(axis=0)


# ---------------------------------------------------------------- layer specs

@dataclass(frozen=True)
class LayerSpec:
    """One entry of an architecture descriptor."""
    kind: str
    name: Optional[str] = None
    out_channels: int = 0
    kernel: Tuple[int, int] = (0, 0)
    window: int = 2
    stride: int = 2
    units: int = 0

    def validate(self) -> None:
        if self.kind not in LAYER_KINDS:
            raise ConfigError(f"Unknown layer kind: {self.kind!r}")
        if self.kind == 'conv':
            if self.out_channels < 1 or min(self.kernel) < 1:
                raise ConfigError(f"Conv layer {self.name} needs out_channels and kernel >= 1")
        elif self.kind == 'maxpool':
            if self.window < 1 or self.stride < 1 or self.stride > self.window:
                raise ConfigError(f"Pooling needs 1 <= stride <= window (got {self.window}/{self.stride})")
        elif self.kind == 'dense' and self.units < 1:
            raise ConfigError(f"Dense layer {self.name} needs units >= 1")

    def to_dict(self) -> Dict:
        data: Dict = {'kind': self.kind}
        if self.name:
            data['name'] = self.name
        if self.kind == 'conv':
            data.update(out_channels=self.out_channels, kernel=list(self.kernel))
        elif self.kind == 'maxpool':
            data.update(window=self.window, stride=self.stride)
        elif self.kind == 'dense':
            data['units'] = self.units
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> 'LayerSpec':
        kernel = data.get('kernel', (0, 0))
        if isinstance(kernel, int):
            kernel = (kernel, kernel)
        spec = cls(
            kind=data['kind'],
            name=data.get('name'),
            out_channels=int(data.get('out_channels', 0)),
            kernel=tuple(int(k) for k in kernel),
            window=int(data.get('window', 2)),
            stride=int(data.get('stride', data.get('window', 2))),
            units=int(data.get('units', 0)),
        )
        spec.validate()
        return spec


# ---------------------------------------------------------------- layer objects

@dataclass
class Layer:
    """A stateless layer: parameters are passed in, never stored."""
    spec: LayerSpec
    input_shape: Tuple[int, ...]
    output_shape: Tuple[int, ...] = field(init=False)

    def __post_init__(self):
        self.output_shape = self._infer_output_shape()

    @property
    def name(self) -> Optional[str]:
        return self.spec.name

    def _infer_output_shape(self) -> Tuple[int, ...]:
        raise NotImplementedError

    def param_shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {}

    def init_params(self, rng: np.random.Generator) -> Params:
        return {}

    def forward(self, x: np.ndarray, params: Params):
        raise NotImplementedError

    def backward(self, cache, dy: np.ndarray, params: Params):
        raise NotImplementedError


def _glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Conv2D(Layer):
    def _infer_output_shape(self):
        if len(self.input_shape) != 3:
            raise ShapeError(f"Conv layer {self.name} needs an H×W×C input, got {self.input_shape}")
        h, w, _ = self.input_shape
        kh, kw = self.spec.kernel
        if h < kh or w < kw:
            raise ShapeError(f"Conv layer {self.name}: input {h}×{w} smaller than kernel {kh}×{kw}")
        return (h - kh + 1, w - kw + 1, self.spec.out_channels)

    def param_shapes(self):
        kh, kw = self.spec.kernel
        cout, cin = self.spec.out_channels, self.input_shape[2]
        return {'kernels': (cout, kh, kw, cin), 'bias': (cout,)}

    def init_params(self, rng):
        kh, kw = self.spec.kernel
        cin, cout = self.input_shape[2], self.spec.out_channels
        shapes = self.param_shapes()
        return {
            'kernels': _glorot(rng, shapes['kernels'], kh * kw * cin, kh * kw * cout),
            'bias': np.zeros(shapes['bias']),
        }

    def forward(self, x, params):
        y, cols = conv_forward(x, params['kernels'], params['bias'], return_cols=True)
        return y, (x, cols)

    def backward(self, cache, dy, params):
        x, cols = cache
        dx, dk, db = conv_backward(x, params['kernels'], dy, cols=cols)
        return dx, {'kernels': dk, 'bias': db}


class MaxPool2D(Layer):
    def _infer_output_shape(self):
        h, w, c = self.input_shape
        win, st = self.spec.window, self.spec.stride
        if h < win or w < win:
            raise ShapeError(f"Pooling input {h}×{w} smaller than window {win}")
        return (_pool_extent(h, win, st), _pool_extent(w, win, st), c)

    def forward(self, x, params):
        y, argmax = maxpool_forward(x, self.spec.window, self.spec.stride)
        return y, (x.shape, argmax)

    def backward(self, cache, dy, params):
        shape, argmax = cache
        return maxpool_backward(dy, argmax, shape), {}


class AbsTanh(Layer):
    def _infer_output_shape(self):
        return tuple(self.input_shape)

    def forward(self, x, params):
        return abstanh(x), x

    def backward(self, cache, dy, params):
        return abstanh_backward(cache, dy), {}


class Dense(Layer):
    """Dense layer; a spatial input is flattened in row-major (H, W, C) order."""

    def _infer_output_shape(self):
        return (self.spec.units,)

    @property
    def fan_in(self) -> int:
        return int(np.prod(self.input_shape))

    def param_shapes(self):
        return {'weights': (self.spec.units, self.fan_in), 'bias': (self.spec.units,)}

    def init_params(self, rng):
        shapes = self.param_shapes()
        return {
            'weights': _glorot(rng, shapes['weights'], self.fan_in, self.spec.units),
            'bias': np.zeros(shapes['bias']),
        }

    def forward(self, x, params):
        n = x.shape[0]
        flat = x.reshape(n, -1)
        return dense_forward(flat, params['weights'], params['bias']), (x.shape, flat)

    def backward(self, cache, dy, params):
        shape, flat = cache
        dx, dw, db = dense_backward(flat, params['weights'], dy)
        return dx.reshape(shape), {'weights': dw, 'bias': db}


_LAYER_TYPES = {'conv': Conv2D, 'maxpool': MaxPool2D, 'abstanh': AbsTanh, 'dense': Dense}


def build_layers(specs: List[LayerSpec], input_shape: Tuple[int, ...]) -> List[Layer]:
    """
    Instantiate a stack of layers, checking that shapes compose.

    Raises:
        ConfigError: invalid layer spec
        ShapeError: the stack does not compose from ``input_shape``
    """
    layers: List[Layer] = []
    shape = tuple(input_shape)
    for spec in specs:
        spec.validate()
        if spec.kind in ('conv', 'maxpool') and len(shape) != 3:
            raise ShapeError(f"Layer {spec.kind} ({spec.name}) cannot follow a dense layer")
        layer = _LAYER_TYPES[spec.kind](spec, shape)
        layers.append(layer)
        shape = layer.output_shape
    return layers
