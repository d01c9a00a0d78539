import numpy as np
import pytest

from facetweak.errors import BackwardError, ConfigError, ShapeError
from facetweak.model.network import NetworkModel, default_architecture
from facetweak.netcore.layers import (
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

H = 1e-5


def _close(analytic, numeric, rel=1e-4, floor=1e-8):
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    return np.all(np.abs(analytic - numeric) <= rel * scale + floor)


def _numeric_grad(f, x, indices):
    """Central differences of scalar ``f`` at the flat ``indices`` of ``x``."""
    grads = []
    flat = x.reshape(-1)
    for i in indices:
        old = flat[i]
        flat[i] = old + H
        up = f()
        flat[i] = old - H
        down = f()
        flat[i] = old
        grads.append((up - down) / (2 * H))
    return np.array(grads)


def _conv_oracle(x, kernels, bias):
    h, w, _ = x.shape
    cout, kh, kw, _ = kernels.shape
    out = np.zeros((h - kh + 1, w - kw + 1, cout))
    for r in range(h - kh + 1):
        for c in range(w - kw + 1):
            for o in range(cout):
                out[r, c, o] = np.sum(x[r:r + kh, c:c + kw, :] * kernels[o]) + bias[o]
    return out


def _pool_oracle(x):
    h, w, ch = x.shape
    out = np.zeros(((h + 1) // 2, (w + 1) // 2, ch))
    for r in range(out.shape[0]):
        for c in range(out.shape[1]):
            for k in range(ch):
                out[r, c, k] = x[2 * r:2 * r + 2, 2 * c:2 * c + 2, k].max()
    return out


def test_conv_identity_kernel(rng):
    """A 1x1 unit kernel copies its input."""
    x = rng.normal(size=(5, 4, 1))
    y = conv_forward(x, np.ones((1, 1, 1, 1)), np.zeros(1))
    assert np.array_equal(y, x)


def test_conv_constant_input():
    """All-ones 3x3 kernel on a constant 2.0 input sums nine values."""
    y = conv_forward(np.full((5, 5, 1), 2.0), np.ones((1, 3, 3, 1)), np.zeros(1))
    assert y.shape == (3, 3, 1)
    assert np.all(y == 18.0)


def test_conv_matches_loop_oracle(rng):
    x = rng.normal(size=(6, 6, 2))
    kernels = rng.normal(size=(3, 3, 3, 2))
    bias = rng.normal(size=3)
    np.testing.assert_allclose(conv_forward(x, kernels, bias), _conv_oracle(x, kernels, bias), atol=1e-12)


def test_conv_batch_matches_single(rng):
    x = rng.normal(size=(4, 6, 6, 2))
    kernels = rng.normal(size=(2, 2, 2, 2))
    bias = rng.normal(size=2)
    batched = conv_forward(x, kernels, bias)
    for i in range(4):
        np.testing.assert_array_equal(batched[i], conv_forward(x[i], kernels, bias))


def test_conv_shape_errors(rng):
    with pytest.raises(ShapeError):
        conv_forward(rng.normal(size=(2, 2, 1)), np.ones((1, 3, 3, 1)), np.zeros(1))
    with pytest.raises(ShapeError):
        conv_forward(rng.normal(size=(5, 5, 2)), np.ones((1, 3, 3, 1)), np.zeros(1))


def test_maxpool_two_by_two():
    y, argmax = maxpool_forward(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(2, 2, 1))
    assert y.shape == (1, 1, 1)
    assert y[0, 0, 0] == 4.0
    # flat index row * W + col of the bottom-right cell
    assert argmax[0, 0, 0] == 3


def test_maxpool_constant_input():
    y, _ = maxpool_forward(np.full((4, 6, 2), 0.7))
    assert np.all(y == 0.7)


def test_maxpool_matches_loop_oracle(rng):
    x = rng.normal(size=(8, 8, 3))
    y, _ = maxpool_forward(x)
    np.testing.assert_array_equal(y, _pool_oracle(x))


def test_maxpool_odd_extent_truncates(rng):
    x = rng.normal(size=(5, 7, 2))
    y, _ = maxpool_forward(x)
    assert y.shape == (3, 4, 2)
    np.testing.assert_array_equal(y, _pool_oracle(x))


def test_maxpool_backward_routes_to_argmax(rng):
    x = rng.normal(size=(2, 5, 5, 3))
    y, argmax = maxpool_forward(x)
    dy = rng.normal(size=y.shape)
    dx = maxpool_backward(dy, argmax, x.shape)
    assert dx.shape == x.shape
    np.testing.assert_allclose(dx.sum(), dy.sum(), atol=1e-12)
    # only window winners receive gradient
    assert np.count_nonzero(dx) <= dy.size


def test_abstanh_values():
    assert abstanh(0.0) == 0.0
    assert abs(float(abstanh(1.0)) - 0.7615941559557649) < 1e-12
    x = np.linspace(-3, 3, 13)
    np.testing.assert_array_equal(abstanh(x), abstanh(-x))


def test_abstanh_subgradient_at_zero():
    assert abstanh_backward(np.array([0.0]), np.array([1.0]))[0] == 0.0


def test_dense_identity_and_bias(rng):
    x = rng.normal(size=4)
    np.testing.assert_array_equal(dense_forward(x, np.eye(4), np.zeros(4)), x)
    b = rng.normal(size=3)
    np.testing.assert_array_equal(dense_forward(x, np.zeros((3, 4)), b), b)


def test_dense_matches_matmul(rng):
    x = rng.normal(size=4)
    w = rng.normal(size=(3, 4))
    b = rng.normal(size=3)
    expected = [sum(w[i, j] * x[j] for j in range(4)) + b[i] for i in range(3)]
    np.testing.assert_allclose(dense_forward(x, w, b), expected, atol=1e-12)


def test_dense_shape_error(rng):
    with pytest.raises(ShapeError):
        dense_forward(rng.normal(size=5), rng.normal(size=(3, 4)), np.zeros(3))


def test_dense_backward_sum_loss(rng):
    """For L = sum(output), dL/dW is outer(1, x)."""
    x = rng.normal(size=4)
    w = rng.normal(size=(3, 4))
    dx, dw, db = dense_backward(x, w, np.ones(3))
    np.testing.assert_allclose(dw, np.outer(np.ones(3), x))
    np.testing.assert_allclose(db, np.ones(3))
    np.testing.assert_allclose(dx, w.sum(axis=0))


def test_conv_gradients_match_finite_differences(rng):
    for _ in range(10):
        x = rng.normal(size=(2, 6, 5, 2))
        kernels = rng.normal(size=(3, 3, 2, 2))
        bias = rng.normal(size=3)
        weights = rng.normal(size=(2, 4, 4, 3))

        def objective():
            return float(np.sum(conv_forward(x, kernels, bias) * weights))

        dx, dk, db = conv_backward(x, kernels, weights)
        for arr, grad in ((x, dx), (kernels, dk), (bias, db)):
            idx = rng.choice(arr.size, size=min(arr.size, 8), replace=False)
            assert _close(grad.reshape(-1)[idx], _numeric_grad(objective, arr, idx))


def test_dense_gradients_match_finite_differences(rng):
    for _ in range(20):
        x = rng.normal(size=(3, 5))
        w = rng.normal(size=(4, 5))
        b = rng.normal(size=4)
        weights = rng.normal(size=(3, 4))

        def objective():
            return float(np.sum(dense_forward(x, w, b) * weights))

        dx, dw, db = dense_backward(x, w, weights)
        for arr, grad in ((x, dx), (w, dw), (b, db)):
            idx = np.arange(arr.size)
            assert _close(grad.reshape(-1), _numeric_grad(objective, arr, idx))


def test_abstanh_and_pool_gradients_match_finite_differences(rng):
    for _ in range(20):
        x = rng.normal(size=(1, 5, 5, 2))
        x[np.abs(x) < 1e-3] = 0.5
        weights = rng.normal(size=(1, 3, 3, 2))

        def objective():
            y, _ = maxpool_forward(abstanh(x))
            return float(np.sum(y * weights))

        y, argmax = maxpool_forward(abstanh(x))
        analytic = abstanh_backward(x, maxpool_backward(weights, argmax, x.shape))
        idx = np.arange(x.size)
        assert _close(analytic.reshape(-1), _numeric_grad(objective, x, idx))


def _forward_with_signs(model, x, weights):
    """Objective value and the signs of every abstanh pre-activation."""
    signs = []
    act = x
    for layer, p in zip(model.layers, model.params):
        if layer.spec.kind == 'abstanh':
            signs.append(np.sign(act).reshape(-1))
        act, _ = layer.forward(act, p)
    return float(np.sum(act * weights)), np.concatenate(signs)


def _stack_gradient_check(model, x, rng, samples_per_layer):
    """Compare backward() with central differences, skipping steps that cross an abstanh kink."""
    out, trace = model.forward(x, keep_trace=True)
    weights = rng.normal(size=out.shape)
    _, grads = model.backward(trace, weights)
    checked = 0
    for params, layer_grads in zip(model.params, grads):
        for key, arr in params.items():
            flat = arr.reshape(-1)
            for i in rng.choice(arr.size, size=min(arr.size, samples_per_layer), replace=False):
                old = flat[i]
                flat[i] = old + H
                up, up_signs = _forward_with_signs(model, x, weights)
                flat[i] = old - H
                down, down_signs = _forward_with_signs(model, x, weights)
                flat[i] = old
                if not np.array_equal(up_signs, down_signs):
                    continue
                assert _close(layer_grads[key].reshape(-1)[i], (up - down) / (2 * H)), key
                checked += 1
    assert checked > 0


def test_tiny_stack_gradients(tiny_network, rng):
    for _ in range(5):
        x = rng.normal(size=(2,) + tiny_network.input_shape)
        _stack_gradient_check(tiny_network, x, rng, samples_per_layer=6)


def test_default_stack_gradients(default_network, rng):
    x = rng.normal(size=(1,) + default_network.input_shape)
    _stack_gradient_check(default_network, x, rng, samples_per_layer=3)


def test_zero_upstream_gradient(tiny_network, rng):
    x = rng.normal(size=(3,) + tiny_network.input_shape)
    out, trace = tiny_network.forward(x, keep_trace=True)
    dx, grads = tiny_network.backward(trace, np.zeros_like(out))
    assert not np.any(dx)
    assert all(not np.any(g) for layer in grads for g in layer.values())


def test_backward_requires_trace(tiny_network, rng):
    x = rng.normal(size=(1,) + tiny_network.input_shape)
    out, _ = tiny_network.forward(x)
    with pytest.raises(BackwardError):
        tiny_network.backward(None, np.ones_like(out))
    other = tiny_network.copy()
    _, trace = other.forward(x, keep_trace=True)
    with pytest.raises(BackwardError):
        tiny_network.backward(trace, np.ones_like(out))


def test_forward_is_deterministic(tiny_network, rng):
    x = rng.normal(size=(4,) + tiny_network.input_shape)
    a, _ = tiny_network.forward(x)
    b, _ = tiny_network.forward(x)
    assert a.tobytes() == b.tobytes()


def test_default_shape_chain():
    layers = build_layers(default_architecture(), (40, 40, 3))
    fc5 = next(layer for layer in layers if layer.name == 'FC5')
    assert int(np.prod(fc5.input_shape)) == 256
    assert layers[-1].output_shape == (10,)


def test_layer_spec_validation():
    with pytest.raises(ConfigError):
        LayerSpec('softmax').validate()
    with pytest.raises(ConfigError):
        LayerSpec.from_dict({'kind': 'conv', 'out_channels': 0, 'kernel': 3})
    spec = LayerSpec.from_dict({'kind': 'maxpool', 'window': 3})
    assert spec.stride == 3


def test_stack_must_compose():
    specs = [LayerSpec('dense', 'FC5', units=4), LayerSpec('conv', 'CL1', out_channels=2, kernel=(2, 2))]
    with pytest.raises(ShapeError):
        build_layers(specs, (4, 4, 1))


def test_output_layer_must_be_dense():
    with pytest.raises(ConfigError):
        NetworkModel([LayerSpec('conv', 'CL1', out_channels=2, kernel=(2, 2))], input_shape=(4, 4, 1))
