"""Minimal differentiable kernel: forward ops, exact backprop, loss, SGD,
and the binary checkpoint format used by all trained modules."""

from .checkpoint import load_tensors, save_tensors
from .loss import bce_with_logits, l2_sum, multilabel_loss, sigmoid
from .ops import (
    conv1d,
    conv1d_backward,
    dense_backward,
    dense_logits,
    global_avg_pool,
    global_avg_pool_backward,
    maxpool1d,
    maxpool1d_backward,
    maxpool1d_with_argmax,
    relu,
    relu_backward,
    same_padding,
)
from .optim import SgdState, sgd_step
from .params import ConvParams, DenseParams, glorot_uniform, init_conv, init_dense

__all__ = [
    "ConvParams",
    "DenseParams",
    "SgdState",
    "bce_with_logits",
    "conv1d",
    "conv1d_backward",
    "dense_backward",
    "dense_logits",
    "glorot_uniform",
    "global_avg_pool",
    "global_avg_pool_backward",
    "init_conv",
    "init_dense",
    "l2_sum",
    "load_tensors",
    "maxpool1d",
    "maxpool1d_backward",
    "maxpool1d_with_argmax",
    "multilabel_loss",
    "relu",
    "relu_backward",
    "same_padding",
    "save_tensors",
    "sgd_step",
    "sigmoid",
]
