"""Forward and backward primitives for small 1-D temporal networks.

Feature maps are float64 arrays of shape (T, K): time on axis 0, channels on
axis 1. Convolutions use zero padding sized so a stride-1 pass preserves T
("same" padding); this keeps activation sequences aligned with their input
units. Backward functions recompute cheap intermediates from the saved inputs
rather than carrying opaque cache objects.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError, ValidationError
from .params import ConvParams, DenseParams


def _as_feature_map(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"feature map must be rank 2 (T, K), got {x.shape}")
    if x.shape[0] < 1 or x.shape[1] < 1:
        raise ShapeError(f"feature map must be non-empty, got {x.shape}")
    return x


def same_padding(kernel_size: int) -> tuple[int, int]:
    """Left/right zero padding so that stride-1 output length equals input length."""
    left = (kernel_size - 1) // 2
    return left, kernel_size - 1 - left


def _conv_windows(x: np.ndarray, kernel_size: int, stride: int) -> np.ndarray:
    """Padded sliding windows of shape (T_out, K_in, kernel_size)."""
    left, right = same_padding(kernel_size)
    xp = np.pad(x, ((left, right), (0, 0)))
    win = sliding_window_view(xp, kernel_size, axis=0)  # (T_padded-ks+1, K, ks)
    return win[::stride]


def conv1d(x: np.ndarray, p: ConvParams) -> np.ndarray:
    """Temporal convolution; output (T_out, out_channels) with
    T_out = floor((T + 2*pad - kernel_size)/stride) + 1 (same-padding rule)."""
    x = _as_feature_map(x)
    if x.shape[1] != p.in_channels:
        raise ShapeError(
            f"conv expects {p.in_channels} input channels, got {x.shape[1]}")
    win = _conv_windows(x, p.kernel_size, p.stride)
    # (T_out, K_in, ks) x (K_out, K_in, ks) -> (T_out, K_out)
    return np.tensordot(win, p.kernels, axes=([1, 2], [1, 2])) + p.bias


def conv1d_backward(x: np.ndarray, p: ConvParams,
                    grad_out: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of a scalar loss wrt conv input, kernels and bias."""
    x = _as_feature_map(x)
    grad_out = np.asarray(grad_out, dtype=np.float64)
    win = _conv_windows(x, p.kernel_size, p.stride)
    if grad_out.shape != (win.shape[0], p.out_channels):
        raise ShapeError("conv grad_out shape does not match forward output")
    grad_bias = grad_out.sum(axis=0)
    grad_kernels = np.tensordot(grad_out, win, axes=([0], [0]))  # (K_out, K_in, ks)
    # Scatter grad back through the sliding windows.
    contrib = np.tensordot(grad_out, p.kernels, axes=([1], [0]))  # (T_out, K_in, ks)
    left, right = same_padding(p.kernel_size)
    grad_xp = np.zeros((x.shape[0] + left + right, x.shape[1]))
    starts = np.arange(win.shape[0]) * p.stride
    for k in range(p.kernel_size):
        # For fixed tap k the target indices are distinct, so fancy-index add is safe.
        grad_xp[starts + k] += contrib[:, :, k]
    grad_x = grad_xp[left:left + x.shape[0]]
    return grad_x, grad_kernels, grad_bias


def _pool_windows(x: np.ndarray, window: int, stride: int) -> np.ndarray:
    win = sliding_window_view(x, window, axis=0)  # (T-w+1, K, w)
    return win[::stride]


def maxpool1d(x: np.ndarray, window: int, stride: int) -> np.ndarray:
    """Per-channel max over non-overlapping (or strided) windows."""
    y, _ = maxpool1d_with_argmax(x, window, stride)
    return y


def maxpool1d_with_argmax(x: np.ndarray, window: int,
                          stride: int) -> tuple[np.ndarray, np.ndarray]:
    """Forward max pooling plus the absolute time index of each selected maximum
    (first maximum on ties, so backward routing is deterministic)."""
    x = _as_feature_map(x)
    if window < 1 or stride < 1:
        raise ValidationError("pool window and stride must be >= 1")
    if x.shape[0] < window:
        raise ShapeError(f"sequence length {x.shape[0]} shorter than pool window {window}")
    win = _pool_windows(x, window, stride)
    local = win.argmax(axis=2)  # (T_out, K), first max on ties
    starts = (np.arange(win.shape[0]) * stride)[:, None]
    argmax = starts + local
    y = np.take_along_axis(win, local[:, :, None], axis=2)[:, :, 0]
    return y, argmax


def maxpool1d_backward(input_length: int, argmax: np.ndarray,
                       grad_out: np.ndarray) -> np.ndarray:
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != argmax.shape:
        raise ShapeError("pool grad_out shape does not match forward output")
    grad_x = np.zeros((input_length, grad_out.shape[1]))
    cols = np.broadcast_to(np.arange(grad_out.shape[1]), grad_out.shape)
    np.add.at(grad_x, (argmax.ravel(), cols.ravel()), grad_out.ravel())
    return grad_x


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    return grad_out * (x > 0.0)


def global_avg_pool(z: np.ndarray) -> np.ndarray:
    """Arithmetic mean over time; (T, K) -> (K,)."""
    z = _as_feature_map(z)
    return z.mean(axis=0)


def global_avg_pool_backward(input_length: int, grad_out: np.ndarray) -> np.ndarray:
    grad_out = np.asarray(grad_out, dtype=np.float64)
    return np.tile(grad_out / input_length, (input_length, 1))


def dense_logits(zbar: np.ndarray, p: DenseParams) -> np.ndarray:
    """Per-class logits from the pooled representation: zbar @ W + bias."""
    zbar = np.asarray(zbar, dtype=np.float64)
    if zbar.shape != (p.in_features,):
        raise ShapeError(
            f"dense expects input of length {p.in_features}, got {zbar.shape}")
    return zbar @ p.weight + p.bias


def dense_backward(zbar: np.ndarray, p: DenseParams,
                   grad_out: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradients wrt the pooled input and the weight matrix (bias is fixed)."""
    zbar = np.asarray(zbar, dtype=np.float64)
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != (p.num_classes,):
        raise ShapeError("dense grad_out must have one entry per class")
    grad_weight = np.outer(zbar, grad_out)
    grad_zbar = p.weight @ grad_out
    return grad_zbar, grad_weight
