"""Parameter containers and initialization for the 1-D temporal networks.

Parameters are plain float64 numpy arrays so the optimizer can update them
in place. Initialization is uniform in [-a, a] with a = sqrt(6/(fan_in+fan_out)).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError, ValidationError


@dataclass
class ConvParams:
    """1-D convolution parameters: kernels (out_channels, in_channels, taps)."""

    kernels: np.ndarray
    bias: np.ndarray
    stride: int = 1

    def __post_init__(self):
        self.kernels = np.asarray(self.kernels, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.kernels.ndim != 3:
            raise ShapeError(f"conv kernels must be rank 3, got {self.kernels.shape}")
        if self.bias.shape != (self.kernels.shape[0],):
            raise ShapeError("conv bias must have one entry per output channel")
        if self.stride < 1:
            raise ValidationError("conv stride must be >= 1")
        if not (np.isfinite(self.kernels).all() and np.isfinite(self.bias).all()):
            raise ValidationError("conv parameters must be finite")

    @property
    def out_channels(self) -> int:
        return self.kernels.shape[0]

    @property
    def in_channels(self) -> int:
        return self.kernels.shape[1]

    @property
    def kernel_size(self) -> int:
        return self.kernels.shape[2]


@dataclass
class DenseParams:
    """Classification layer: weight (K, C). The bias stays fixed at zero so the
    activation-sequence decomposition of the video logit is exact."""

    weight: np.ndarray
    bias: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if self.weight.ndim != 2:
            raise ShapeError(f"dense weight must be rank 2, got {self.weight.shape}")
        if self.bias is None:
            self.bias = np.zeros(self.weight.shape[1], dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.bias.shape != (self.weight.shape[1],):
            raise ShapeError("dense bias must have one entry per class")
        if not (np.isfinite(self.weight).all() and np.isfinite(self.bias).all()):
            raise ValidationError("dense parameters must be finite")

    @property
    def in_features(self) -> int:
        return self.weight.shape[0]

    @property
    def num_classes(self) -> int:
        return self.weight.shape[1]


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(np.float64)


def init_conv(rng: np.random.Generator, in_channels: int, out_channels: int,
              kernel_size: int, stride: int = 1) -> ConvParams:
    fan_in = in_channels * kernel_size
    fan_out = out_channels * kernel_size
    kernels = glorot_uniform(rng, (out_channels, in_channels, kernel_size), fan_in, fan_out)
    return ConvParams(kernels=kernels, bias=np.zeros(out_channels), stride=stride)


def init_dense(rng: np.random.Generator, in_features: int, num_classes: int) -> DenseParams:
    weight = glorot_uniform(rng, (in_features, num_classes), in_features, num_classes)
    return DenseParams(weight=weight)
