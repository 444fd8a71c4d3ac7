"""Analytic gradients checked against central finite differences.

The oracle perturbs every parameter entry by +-h and differences the loss;
agreement is required to relative error 1e-4 wherever the gradient is larger
than 1e-6 in magnitude.
"""
import numpy as np
import pytest

from cpmn.ccm import CcmStageParams, init_ccm_stage, stage_gradients
from cpmn.nnkernel import DenseParams, bce_with_logits, dense_backward, dense_logits, sigmoid
from cpmn.pam import init_pam, pyramid_gradients


def numeric_gradient(loss_fn, arr, h=1e-4):
    grad = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = arr[idx]
        arr[idx] = orig + h
        plus = loss_fn()
        arr[idx] = orig - h
        minus = loss_fn()
        arr[idx] = orig
        grad[idx] = (plus - minus) / (2 * h)
        it.iternext()
    return grad


def assert_matches_finite_differences(loss_fn, params: dict, analytic: dict,
                                      rtol=1e-4, floor=1e-6):
    for name, tensor in params.items():
        numeric = numeric_gradient(loss_fn, tensor)
        a, n = analytic[name], numeric
        mask = (np.abs(a) > floor) | (np.abs(n) > floor)
        if not mask.any():
            continue
        rel = np.abs(a - n)[mask] / np.maximum(np.abs(a), np.abs(n))[mask]
        assert rel.max() < rtol, f"{name}: max relative error {rel.max():.2e}"


def random_labels(rng, c):
    y = (rng.random(c) < 0.5).astype(float)
    if y.sum() == 0:
        y[int(rng.integers(c))] = 1.0
    return y


def check_ccm_config(seed):
    rng = np.random.default_rng(seed)
    t = int(rng.integers(3, 17))
    g = int(rng.integers(1, 6))
    filters = int(rng.integers(1, 8))
    c = int(rng.integers(1, 5))
    lam = float(rng.choice([0.0, 0.01]))
    form = str(rng.choice(["full", "positives_only"]))
    x = rng.normal(size=(t, g))
    params = init_ccm_stage(rng, g, filters, c)
    params.conv1.bias[:] = rng.normal(scale=0.1, size=filters)
    params.conv2.bias[:] = rng.normal(scale=0.1, size=filters)
    y = random_labels(rng, c)
    _, grads = stage_gradients(x, y, params, lam=lam, form=form)
    trainable = params.trainable()
    assert_matches_finite_differences(
        lambda: stage_gradients(x, y, params, lam=lam, form=form)[0], trainable, grads)


def check_pam_config(seed):
    rng = np.random.default_rng(seed)
    t = int(rng.choice([8, 16, 24, 32]))
    g = int(rng.integers(1, 6))
    filters = int(rng.integers(1, 8))
    c = int(rng.integers(1, 5))
    lam = float(rng.choice([0.0, 0.01]))
    activation = str(rng.choice(["relu", "linear"]))
    window = rng.normal(size=(t, g))
    params = init_pam(rng, g, filters, c)
    for conv in params.embed + params.predict:
        conv.bias[:] = rng.normal(scale=0.1, size=conv.out_channels)
    y = random_labels(rng, c)
    _, grads = pyramid_gradients(window, y, params, lam=lam, activation=activation)
    assert_matches_finite_differences(
        lambda: pyramid_gradients(window, y, params, lam=lam, activation=activation)[0],
        params.trainable(), grads)


@pytest.mark.parametrize("seed", range(6))
def test_ccm_stage_gradients_match_finite_differences(seed):
    check_ccm_config(seed)


@pytest.mark.parametrize("seed", range(100, 106))
def test_pam_gradients_match_finite_differences(seed):
    check_pam_config(seed)


def test_dead_relu_branch_has_exactly_zero_gradient():
    rng = np.random.default_rng(0)
    params = init_ccm_stage(rng, 3, 4, 2)
    params.conv1.bias[:] = -100.0  # first activation is uniformly dead
    x = rng.normal(size=(9, 3))
    _, grads = stage_gradients(x, np.array([1.0, 0.0]), params)
    np.testing.assert_array_equal(grads["conv2.kernels"], 0.0)
    np.testing.assert_array_equal(grads["conv1.kernels"], 0.0)
    np.testing.assert_array_equal(grads["conv1.bias"], 0.0)


def test_linear_layer_gradient_is_outer_product():
    rng = np.random.default_rng(3)
    p = DenseParams(weight=rng.normal(size=(5, 3)))
    zbar = rng.normal(size=5)
    y = np.array([1.0, 0.0, 1.0])
    logits = dense_logits(zbar, p)
    _, grad_logits = bce_with_logits(logits, y)
    _, grad_w = dense_backward(zbar, p, grad_logits)
    np.testing.assert_allclose(grad_w, np.outer(zbar, sigmoid(logits) - y), atol=1e-12)
