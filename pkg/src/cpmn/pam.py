"""Pyramid attention over fixed-length temporal windows.

The input window is pooled three times (scale step 2), giving four levels of
lengths [W, W/2, W/4, W/8]. Each level is embedded with a 1x1 conv, enriched
top-down by upsampling the coarser embedding and adding it in, and projected
to per-class label maps with a final 1x1 conv. Video-level logits average the
pooled label maps across levels; training matches them against the video's
label set, window by window.

At inference the per-level label maps are upsampled back to window length by
row repetition, summed, concatenated across windows, and min-max normalized
per class over the whole video into a heatmap in [0, 1].
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ccm import normalize_per_class
from .data.types import TrainingExample, label_vector
from .errors import AssemblyError, NumericalError, ShapeError, ValidationError
from .nnkernel import (
    ConvParams,
    SgdState,
    bce_with_logits,
    conv1d,
    conv1d_backward,
    global_avg_pool,
    global_avg_pool_backward,
    init_conv,
    l2_sum,
    maxpool1d_backward,
    maxpool1d_with_argmax,
    relu,
    relu_backward,
    sgd_step,
)
from .training import accumulate, add_l2_gradient, batches, lr_at, total_epochs
from .util import rng_for

LEVELS = 4
ACTIVATIONS = ("relu", "linear")


@dataclass
class PamHyper:
    window_len: int = 64
    lam: float = 0.0025
    filters: int = 512
    batch_size: int = 16
    lr_schedule: tuple[tuple[int, float], ...] = ((30, 1e-3), (120, 1e-4))
    momentum: float = 0.0
    activation: str = "relu"   # activation of the per-level embedding convs

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValidationError(f"unknown activation {self.activation!r}")
        if self.lam < 0:
            raise ValidationError("regularization weight must be >= 0")


@dataclass
class PamParams:
    embed: list[ConvParams]    # per level, 1x1 conv to the shared width
    predict: list[ConvParams]  # per level, 1x1 conv to per-class label maps

    def __post_init__(self):
        if len(self.embed) != LEVELS or len(self.predict) != LEVELS:
            raise ShapeError(f"pyramid has exactly {LEVELS} levels")

    def trainable(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for i in range(LEVELS):
            out[f"level{i + 1}.embed.kernels"] = self.embed[i].kernels
            out[f"level{i + 1}.embed.bias"] = self.embed[i].bias
            out[f"level{i + 1}.predict.kernels"] = self.predict[i].kernels
            out[f"level{i + 1}.predict.bias"] = self.predict[i].bias
        return out

    def tensors(self) -> dict[str, np.ndarray]:
        return self.trainable()

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray]) -> "PamParams":
        embed, predict = [], []
        for i in range(LEVELS):
            embed.append(ConvParams(tensors[f"level{i + 1}.embed.kernels"],
                                    tensors[f"level{i + 1}.embed.bias"]))
            predict.append(ConvParams(tensors[f"level{i + 1}.predict.kernels"],
                                      tensors[f"level{i + 1}.predict.bias"]))
        return cls(embed=embed, predict=predict)


def init_pam(rng: np.random.Generator, in_dim: int, filters: int,
             num_classes: int) -> PamParams:
    embed = [init_conv(rng, in_dim, filters, kernel_size=1) for _ in range(LEVELS)]
    predict = [init_conv(rng, filters, num_classes, kernel_size=1) for _ in range(LEVELS)]
    return PamParams(embed=embed, predict=predict)


@dataclass
class WindowPlan:
    """Non-overlapping windows tiling [0, l_u); only the last may be padded."""

    window_len: int
    l_u: int
    spans: list[tuple[int, int, int]]  # (start, end, pad) with end - start + pad == window_len


def plan_windows(l_u: int, window_len: int) -> WindowPlan:
    if window_len < 8 or window_len % 8 != 0:
        raise ValidationError(
            f"window length must be a positive multiple of 8, got {window_len}")
    if l_u < 1:
        raise ValidationError("video must contain at least one unit")
    spans = []
    start = 0
    while start < l_u:
        end = min(start + window_len, l_u)
        spans.append((start, end, window_len - (end - start)))
        start += window_len
    return WindowPlan(window_len=window_len, l_u=l_u, spans=spans)


def window_slice(features: np.ndarray, span: tuple[int, int, int]) -> np.ndarray:
    """Extract one window, zero-padding the tail when the video runs out."""
    start, end, pad = span
    block = features[start:end]
    if pad:
        block = np.concatenate([block, np.zeros((pad, features.shape[1]))], axis=0)
    return block


@dataclass
class LabelMapSet:
    """Per-level label maps for one window; level i has T = window_len / 2**i."""

    maps: list[np.ndarray]
    window_start: int


def _activate(x: np.ndarray, kind: str) -> np.ndarray:
    return relu(x) if kind == "relu" else x


def _activate_backward(x: np.ndarray, grad: np.ndarray, kind: str) -> np.ndarray:
    return relu_backward(x, grad) if kind == "relu" else grad


def pam_forward(window: np.ndarray, p: PamParams,
                activation: str = "relu") -> tuple[LabelMapSet, np.ndarray]:
    maps, logits, _ = _pam_forward_cache(window, p, activation)
    return maps, logits


def _pam_forward_cache(window: np.ndarray, p: PamParams, activation: str):
    window = np.asarray(window, dtype=np.float64)
    if window.shape[0] % (2 ** (LEVELS - 1)) != 0:
        raise ShapeError(
            f"window length {window.shape[0]} is not divisible by {2 ** (LEVELS - 1)}")
    xs = [window]
    argmaxes = []
    for _ in range(LEVELS - 1):
        pooled, arg = maxpool1d_with_argmax(xs[-1], 2, 2)
        xs.append(pooled)
        argmaxes.append(arg)
    pre = [conv1d(xs[i], p.embed[i]) for i in range(LEVELS)]
    emb = [_activate(pre[i], activation) for i in range(LEVELS)]
    # Top-down lateral path: coarser embeddings are repeated x2 and added in.
    fused: list[np.ndarray] = [None] * LEVELS  # type: ignore[list-item]
    fused[LEVELS - 1] = emb[LEVELS - 1]
    for i in range(LEVELS - 2, -1, -1):
        fused[i] = emb[i] + np.repeat(fused[i + 1], 2, axis=0)
    maps = [conv1d(fused[i], p.predict[i]) for i in range(LEVELS)]
    level_logits = [global_avg_pool(m) for m in maps]
    logits = np.mean(level_logits, axis=0)
    cache = (xs, argmaxes, pre, fused)
    return LabelMapSet(maps=maps, window_start=0), logits, cache


def _pam_backward(cache, p: PamParams, grad_logits: np.ndarray,
                  activation: str) -> dict[str, np.ndarray]:
    xs, argmaxes, pre, fused = cache
    grads: dict[str, np.ndarray] = {}
    grad_fused: list[np.ndarray] = [None] * LEVELS  # type: ignore[list-item]
    for i in range(LEVELS):
        grad_map = global_avg_pool_backward(fused[i].shape[0], grad_logits / LEVELS)
        grad_u, grad_k, grad_b = conv1d_backward(fused[i], p.predict[i], grad_map)
        grads[f"level{i + 1}.predict.kernels"] = grad_k
        grads[f"level{i + 1}.predict.bias"] = grad_b
        grad_fused[i] = grad_u
    # Reverse the top-down additions: finer levels feed gradient to coarser ones.
    for i in range(1, LEVELS):
        up = grad_fused[i - 1]
        grad_fused[i] = grad_fused[i] + up.reshape(-1, 2, up.shape[1]).sum(axis=1)
    grad_x: list[np.ndarray] = [None] * LEVELS  # type: ignore[list-item]
    for i in range(LEVELS):
        grad_pre = _activate_backward(pre[i], grad_fused[i], activation)
        gx, grad_k, grad_b = conv1d_backward(xs[i], p.embed[i], grad_pre)
        grads[f"level{i + 1}.embed.kernels"] = grad_k
        grads[f"level{i + 1}.embed.bias"] = grad_b
        grad_x[i] = gx
    # Pool chain: gradient at level i+1 routes back to its argmax positions.
    for i in range(LEVELS - 2, -1, -1):
        grad_x[i] = grad_x[i] + maxpool1d_backward(xs[i].shape[0], argmaxes[i],
                                                   grad_x[i + 1])
    return grads


def pyramid_gradients(window: np.ndarray, labels_vec: np.ndarray, p: PamParams,
                      lam: float = 0.0, activation: str = "relu"
                      ) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and exact gradients of the pyramid on one window (reverse mode)."""
    _, logits, cache = _pam_forward_cache(window, p, activation)
    loss, grad_logits = bce_with_logits(logits, labels_vec)
    grads = _pam_backward(cache, p, grad_logits, activation)
    if lam:
        trainable = p.trainable()
        loss += lam * l2_sum(trainable.values())
        for name, value in trainable.items():
            grads[name] = grads[name] + 2.0 * lam * value
    return loss, grads


def upsample_repeat(values: np.ndarray, factor: int,
                    expected_length: int | None = None) -> np.ndarray:
    """Repeat each row `factor` times consecutively."""
    if factor < 1:
        raise ValidationError("upsample factor must be >= 1")
    out = np.repeat(np.asarray(values), factor, axis=0)
    if expected_length is not None and out.shape[0] != expected_length:
        raise ShapeError(
            f"upsampled length {out.shape[0]} does not match expected {expected_length}")
    return out


def assemble_heatmap(window_maps: Sequence[LabelMapSet], plan: WindowPlan) -> np.ndarray:
    """Sum the upsampled label maps per window, concatenate windows, truncate
    the padded tail, and min-max normalize per class over the whole video.

    A class whose pre-normalized map is constant comes out all zeros."""
    if len(window_maps) != len(plan.spans):
        raise AssemblyError(
            f"expected {len(plan.spans)} window results, got {len(window_maps)}")
    blocks = []
    for maps in window_maps:
        if len(maps.maps) != LEVELS:
            raise AssemblyError(f"window result must carry {LEVELS} levels")
        total = np.zeros((plan.window_len, maps.maps[0].shape[1]))
        for i, level_map in enumerate(maps.maps):
            total += upsample_repeat(level_map, 2 ** i, plan.window_len)
        blocks.append(total)
    full = np.concatenate(blocks, axis=0)[:plan.l_u]
    return normalize_per_class(full)


@dataclass
class PamTrainResult:
    params: PamParams
    history: list[dict]
    epochs_trained: int


def train_pam(train_set: Sequence[TrainingExample], hyper: PamHyper, modality: str,
              num_classes: int, seed: int = 0, *,
              init: PamParams | None = None, start_epoch: int = 0) -> PamTrainResult:
    """Window-level weakly supervised training: every window of a video is a
    sample carrying the video's label set."""
    if not train_set:
        raise ValidationError("training set is empty")
    in_dim = train_set[0].features.feature_dim
    params = init if init is not None else init_pam(
        rng_for(seed, "pam", modality, "init"), in_dim, hyper.filters, num_classes)
    state = SgdState(learning_rate=lr_at(hyper.lr_schedule, start_epoch),
                     momentum=hyper.momentum)
    history: list[dict] = []

    plans = [plan_windows(ex.features.l_u, hyper.window_len) for ex in train_set]

    for epoch in range(start_epoch, total_epochs(hyper.lr_schedule)):
        lr = lr_at(hyper.lr_schedule, epoch)
        state.learning_rate = lr
        order = rng_for(seed, "pam", modality, "order", epoch).permutation(len(train_set))
        bce_sum = 0.0
        for batch in batches(order, hyper.batch_size):
            grads: dict[str, np.ndarray] = {}
            for vid in batch:
                ex = train_set[int(vid)]
                plan = plans[int(vid)]
                y = label_vector(ex.labels, num_classes)
                stream = ex.features.stream(modality).astype(np.float64)
                window_scale = 1.0 / (len(batch) * len(plan.spans))
                video_bce = 0.0
                for span in plan.spans:
                    block = window_slice(stream, span)
                    _, logits, cache = _pam_forward_cache(block, params, hyper.activation)
                    loss, grad_logits = bce_with_logits(logits, y)
                    if not np.isfinite(loss):
                        raise NumericalError(
                            f"pyramid loss diverged (epoch {epoch}, video {ex.features.video_id})")
                    video_bce += loss
                    accumulate(grads, _pam_backward(cache, params, grad_logits,
                                                    hyper.activation), window_scale)
                bce_sum += video_bce / len(plan.spans)
            add_l2_gradient(grads, params.trainable(), hyper.lam)
            sgd_step(params.trainable(), grads, state)
        history.append({
            "epoch": epoch,
            "lr": lr,
            "bce": bce_sum / len(train_set),
            "l2": hyper.lam * l2_sum(params.trainable().values()),
        })

    return PamTrainResult(params=params, history=history,
                          epochs_trained=total_epochs(hyper.lr_schedule))


def infer_heatmap(features: np.ndarray, params: PamParams, window_len: int,
                  activation: str = "relu") -> tuple[np.ndarray, np.ndarray]:
    """Full-video heatmap (l_u, C) in [0, 1] plus video logits averaged over
    windows."""
    plan = plan_windows(features.shape[0], window_len)
    window_results = []
    logit_rows = []
    for span in plan.spans:
        block = window_slice(np.asarray(features, dtype=np.float64), span)
        maps, logits = pam_forward(block, params, activation)
        window_results.append(maps)
        logit_rows.append(logits)
    heat = assemble_heatmap(window_results, plan)
    return heat, np.mean(logit_rows, axis=0)
