"""
Adam optimizer over a flat list of parameter arrays.
"""
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from ..errors import ShapeError


@dataclass
class AdamState:
    """Moment accumulators and hyperparameters for one optimizer."""
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(
        cls,
        params: Sequence[np.ndarray],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ) -> 'AdamState':
        return cls(
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
            m=[np.zeros_like(p, dtype=np.float64) for p in params],
            v=[np.zeros_like(p, dtype=np.float64) for p in params],
        )


def adam_step(
    params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState
) -> Tuple[List[np.ndarray], AdamState]:
    """
    Apply one bias-corrected Adam update.

    Inputs are not modified; new parameter arrays and a new state are returned.

    Args:
        params: Parameter arrays
        grads: Gradients, one per parameter, same shapes
        state: Optimizer state; created lazily when its accumulators are empty

    Returns:
        (updated params, advanced state)
    """
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} parameters but {len(grads)} gradients")
    if not state.m:
        state = AdamState.for_params(params, state.lr, state.beta1, state.beta2, state.epsilon)
    step = state.step + 1
    bc1 = 1.0 - state.beta1 ** step
    bc2 = 1.0 - state.beta2 ** step

    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or m.shape != p.shape:
            raise ShapeError(f"Gradient {g.shape} / moment {m.shape} do not match parameter {p.shape}")
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        new_params.append(p - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon))
        new_m.append(m)
        new_v.append(v)

    return new_params, AdamState(
        lr=state.lr,
        beta1=state.beta1,
        beta2=state.beta2,
        epsilon=state.epsilon,
        step=step,
        m=new_m,
        v=new_v,
    )
