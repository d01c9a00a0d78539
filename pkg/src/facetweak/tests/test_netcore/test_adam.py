import math

import numpy as np
import pytest

from facetweak.errors import ShapeError
from facetweak.netcore.adam import AdamState, adam_step


def _scalar_adam(grads, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, x=0.0):
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        x -= lr * (m / (1 - beta1 ** t)) / (math.sqrt(v / (1 - beta2 ** t)) + eps)
    return x


def test_zero_gradient_keeps_params():
    params = [np.array([1.0, -2.0]), np.ones((2, 2))]
    new, state = adam_step(params, [np.zeros(2), np.zeros((2, 2))], AdamState())
    for before, after in zip(params, new):
        np.testing.assert_array_equal(before, after)
    assert state.step == 1


def test_first_step_moves_by_learning_rate():
    g = 0.37
    new, _ = adam_step([np.array([0.0])], [np.array([g])], AdamState(lr=1e-3))
    assert new[0][0] == pytest.approx(-1e-3 * g / (abs(g) + 1e-8), abs=1e-15)


def test_matches_scalar_oracle():
    params = [np.array([0.5])]
    state = AdamState()
    for g in (1.0, -1.0, 1.0):
        params, state = adam_step(params, [np.array([g])], state)
    assert state.step == 3
    assert abs(params[0][0] - _scalar_adam([1.0, -1.0, 1.0], x=0.5)) < 1e-12


def test_inputs_not_modified():
    params = [np.array([1.0])]
    grads = [np.array([2.0])]
    adam_step(params, grads, AdamState())
    assert params[0][0] == 1.0
    assert grads[0][0] == 2.0


def test_accumulator_shapes_follow_params():
    params = [np.zeros((3, 2)), np.zeros(4)]
    _, state = adam_step(params, [np.ones((3, 2)), np.ones(4)], AdamState())
    assert [m.shape for m in state.m] == [(3, 2), (4,)]
    assert [v.shape for v in state.v] == [(3, 2), (4,)]


def test_shape_mismatch():
    with pytest.raises(ShapeError):
        adam_step([np.zeros(2)], [np.zeros(3)], AdamState())
    with pytest.raises(ShapeError):
        adam_step([np.zeros(2)], [], AdamState())
