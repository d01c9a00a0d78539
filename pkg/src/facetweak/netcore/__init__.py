from .adam import AdamState, adam_step
from .container import FORMAT_VERSION, Container
from .layers import (
    LayerSpec,
    abstanh,
    abstanh_backward,
    build_layers,
    conv_backward,
    conv_forward,
    dense_backward,
    dense_forward,
    maxpool_backward,
    maxpool_forward,
)

__all__ = [
    "AdamState",
    "adam_step",
    "Container",
    "FORMAT_VERSION",
    "LayerSpec",
    "abstanh",
    "abstanh_backward",
    "build_layers",
    "conv_backward",
    "conv_forward",
    "dense_backward",
    "dense_forward",
    "maxpool_backward",
    "maxpool_forward",
]
