"""Cascaded classification with online adversarial erasing.

Two structurally identical single-modality classifiers are trained side by
side. The first sees the sampled unit features; its temporal class activation
sequence (T-CAS) marks the units it found discriminative, those units are
zeroed out, and the second classifier is trained on the erased sequence so it
must find complementary evidence. At inference the two activation sequences
are min-max normalized per class and fused with an elementwise maximum.

Each stage is: conv(k=3, s=1) + ReLU -> conv(k=3, s=1) + ReLU -> global
average pool -> dense. The dense bias is fixed at zero, which makes the
per-unit activation decomposition of the video logit exact:
sum_t tcas[t, c] == T * logit[c].
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data.sampling import SamplerConfig, sample_indices
from .data.types import TrainingExample, label_vector
from .errors import NumericalError, ShapeError, ValidationError
from .nnkernel import (
    ConvParams,
    DenseParams,
    SgdState,
    bce_with_logits,
    conv1d,
    conv1d_backward,
    dense_backward,
    dense_logits,
    global_avg_pool,
    global_avg_pool_backward,
    init_conv,
    init_dense,
    l2_sum,
    relu,
    relu_backward,
    sgd_step,
)
from .training import accumulate, add_l2_gradient, batches, lr_at, total_epochs
from .util import rng_for

STAGES = ("A", "B", "cascaded")


@dataclass
class CcmHyper:
    zeta: float = 0.4            # erase threshold on the normalized stage-A T-CAS
    lam: float = 0.0025          # L2 regularization weight
    filters: int = 512
    batch_size: int = 16
    lr_schedule: tuple[tuple[int, float], ...] = ((30, 1e-3), (120, 1e-4))
    momentum: float = 0.0
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    loss_form: str = "full"
    normalize_before_mask: bool = True

    def __post_init__(self):
        if not 0.0 < self.zeta < 1.0:
            raise ValidationError("erase threshold must lie in (0, 1)")
        if self.lam < 0:
            raise ValidationError("regularization weight must be >= 0")
        if self.filters < 1:
            raise ValidationError("filter count must be >= 1")


@dataclass
class CcmStageParams:
    conv1: ConvParams
    conv2: ConvParams
    dense: DenseParams

    def trainable(self) -> dict[str, np.ndarray]:
        # dense.bias stays at zero by construction, so it is not trained.
        return {
            "conv1.kernels": self.conv1.kernels,
            "conv1.bias": self.conv1.bias,
            "conv2.kernels": self.conv2.kernels,
            "conv2.bias": self.conv2.bias,
            "dense.weight": self.dense.weight,
        }

    def tensors(self) -> dict[str, np.ndarray]:
        out = dict(self.trainable())
        out["dense.bias"] = self.dense.bias
        return out

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray]) -> "CcmStageParams":
        return cls(
            conv1=ConvParams(tensors["conv1.kernels"], tensors["conv1.bias"]),
            conv2=ConvParams(tensors["conv2.kernels"], tensors["conv2.bias"]),
            dense=DenseParams(tensors["dense.weight"], tensors.get("dense.bias")),
        )


def init_ccm_stage(rng: np.random.Generator, in_dim: int, filters: int,
                   num_classes: int) -> CcmStageParams:
    return CcmStageParams(
        conv1=init_conv(rng, in_dim, filters, kernel_size=3),
        conv2=init_conv(rng, filters, filters, kernel_size=3),
        dense=init_dense(rng, filters, num_classes),
    )


@dataclass
class Tcas:
    """Per-class temporal activation sequence plus provenance."""

    values: np.ndarray       # (T, C)
    stage: str
    modality: str
    indices: np.ndarray      # original unit index of each row

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValidationError(f"unknown stage {self.stage!r}")
        if len(self.indices) != self.values.shape[0]:
            raise ShapeError("index map length must equal activation length")


@dataclass
class EraseMask:
    values: np.ndarray       # bool (T, C)
    zeta: float


def stage_forward(x: np.ndarray, p: CcmStageParams) -> tuple[np.ndarray, np.ndarray]:
    """Returns (Z, logits): the post-activation second conv features and the
    per-class video logits."""
    z, logits, _ = _stage_forward_cache(x, p)
    return z, logits


def _stage_forward_cache(x: np.ndarray, p: CcmStageParams):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] < 3:
        raise ValidationError(f"stage input needs >= 3 units, got {x.shape[0]}")
    c1 = conv1d(x, p.conv1)
    a1 = relu(c1)
    c2 = conv1d(a1, p.conv2)
    z = relu(c2)
    zbar = global_avg_pool(z)
    logits = dense_logits(zbar, p.dense)
    return z, logits, (x, c1, a1, c2, zbar)


def _stage_backward(cache, p: CcmStageParams, grad_logits: np.ndarray) -> dict[str, np.ndarray]:
    x, c1, a1, c2, zbar = cache
    grad_zbar, grad_w = dense_backward(zbar, p.dense, grad_logits)
    grad_z = global_avg_pool_backward(x.shape[0], grad_zbar)
    grad_c2 = relu_backward(c2, grad_z)
    grad_a1, grad_k2, grad_b2 = conv1d_backward(a1, p.conv2, grad_c2)
    grad_c1 = relu_backward(c1, grad_a1)
    _, grad_k1, grad_b1 = conv1d_backward(x, p.conv1, grad_c1)
    return {
        "conv1.kernels": grad_k1,
        "conv1.bias": grad_b1,
        "conv2.kernels": grad_k2,
        "conv2.bias": grad_b2,
        "dense.weight": grad_w,
    }


def stage_gradients(x: np.ndarray, labels_vec: np.ndarray, p: CcmStageParams,
                    lam: float = 0.0, form: str = "full") -> tuple[float, dict[str, np.ndarray]]:
    """Loss and exact gradients of one stage on one video (reverse mode)."""
    _, logits, cache = _stage_forward_cache(x, p)
    loss, grad_logits = bce_with_logits(logits, labels_vec, form)
    grads = _stage_backward(cache, p, grad_logits)
    if lam:
        trainable = p.trainable()
        loss += lam * l2_sum(trainable.values())
        for name, value in trainable.items():
            grads[name] = grads[name] + 2.0 * lam * value
    return loss, grads


def compute_tcas(z: np.ndarray, dense: DenseParams) -> np.ndarray:
    """Per-unit, per-class activation: tcas[t, c] = sum_k W[k, c] * Z[t, k]."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] != dense.in_features:
        raise ShapeError(
            f"activation channels {z.shape} do not match dense input {dense.in_features}")
    return z @ dense.weight


def normalize_per_class(values: np.ndarray) -> np.ndarray:
    """Min-max normalize each class column to [0, 1]; constant columns become
    all zeros rather than dividing by zero."""
    values = np.asarray(values, dtype=np.float64)
    lo = values.min(axis=0, keepdims=True)
    hi = values.max(axis=0, keepdims=True)
    span = hi - lo
    out = np.zeros_like(values)
    ok = span[0] > 0
    out[:, ok] = (values[:, ok] - lo[:, ok]) / span[:, ok]
    return out


def normalize_tcas(tcas: Tcas) -> Tcas:
    return Tcas(values=normalize_per_class(tcas.values), stage=tcas.stage,
                modality=tcas.modality, indices=tcas.indices)


def normalize_tcas_live(tcas: Tcas, erased_rows: np.ndarray) -> Tcas:
    """Min-max normalize per class over the non-erased units only, and pin the
    erased positions to zero.

    The mining stage's response at erased (all-zero-input) units is an
    input-independent constant; letting it set the normalization extremes
    distorts the whole map, and those regions belong to the first stage anyway.
    """
    values = np.asarray(tcas.values, dtype=np.float64)
    erased_rows = np.asarray(erased_rows, dtype=bool)
    if erased_rows.shape != (values.shape[0],):
        raise ShapeError("erased-row mask must have one entry per unit")
    live = ~erased_rows
    out = np.zeros_like(values)
    if live.any():
        lo = values[live].min(axis=0)
        hi = values[live].max(axis=0)
        span = hi - lo
        ok = span > 0
        out[np.ix_(live, ok)] = (values[np.ix_(live, ok)] - lo[ok]) / span[ok]
    return Tcas(values=out, stage=tcas.stage, modality=tcas.modality,
                indices=tcas.indices)


def make_mask(tcas: Tcas, zeta: float, classes: frozenset[int] | set[int],
              normalize: bool = True) -> EraseMask:
    """Mark units whose (normalized) activation exceeds zeta, per selected class.

    A constant activation column normalizes to all zeros, so it contributes an
    empty mask for that class.
    """
    if not 0.0 < zeta < 1.0:
        raise ValidationError("erase threshold must lie in (0, 1)")
    values = normalize_per_class(tcas.values) if normalize else tcas.values
    num_classes = values.shape[1]
    mask = np.zeros(values.shape, dtype=bool)
    for c in classes:
        if not 0 <= c < num_classes:
            raise ValidationError(f"mask class {c} outside [0, {num_classes})")
        mask[:, c] = values[:, c] > zeta
    return EraseMask(values=mask, zeta=zeta)


def erase_features(x: np.ndarray, mask: EraseMask) -> np.ndarray:
    """Zero the full feature vector of every unit any masked class fired on;
    all other units are returned bit-identical."""
    x = np.asarray(x)
    if mask.values.shape[0] != x.shape[0]:
        raise ShapeError(
            f"mask length {mask.values.shape[0]} does not match sequence {x.shape[0]}")
    out = x.copy()
    out[mask.values.any(axis=1)] = 0
    return out


def cascade_fuse(tcas_a: Tcas, tcas_b: Tcas) -> Tcas:
    """Elementwise maximum of the two stages' activation sequences. Callers
    normalize both per class first so the stages are commensurable (a raw-max
    fusion is possible by passing unnormalized values)."""
    if tcas_a.values.shape != tcas_b.values.shape:
        raise ShapeError("cascade fusion needs equal-shape activation sequences")
    if tcas_a.modality != tcas_b.modality:
        raise ValidationError("cascade fusion across modalities is undefined")
    if not np.array_equal(tcas_a.indices, tcas_b.indices):
        raise ValidationError("cascade fusion needs matching unit index maps")
    return Tcas(values=np.maximum(tcas_a.values, tcas_b.values),
                stage="cascaded", modality=tcas_a.modality, indices=tcas_a.indices)


@dataclass
class CcmTrainResult:
    stage_a: CcmStageParams
    stage_b: CcmStageParams
    history: list[dict]
    epochs_trained: int


def train_ccm(train_set: Sequence[TrainingExample], hyper: CcmHyper, modality: str,
              num_classes: int, seed: int = 0, *, train_stage_b: bool = True,
              init: tuple[CcmStageParams, CcmStageParams] | None = None,
              start_epoch: int = 0) -> CcmTrainResult:
    """Train both cascade stages on weakly labeled videos.

    Per video and step: stage A runs on the sampled features, its T-CAS over
    the video's label set is thresholded into an erase mask, stage B runs on
    the erased features, and both stages take their own gradient step. The
    mask is a constant for stage B (no gradient flows back into stage A), and
    stage A's update never depends on stage B, so disabling ``train_stage_b``
    reproduces stage A's trajectory exactly.

    Epoch randomness is keyed by (seed, epoch), so restarting from
    ``start_epoch`` with the stored parameters continues the same trajectory.
    """
    if not train_set:
        raise ValidationError("training set is empty")
    if num_classes < 1:
        raise ValidationError("num_classes must be >= 1")
    in_dim = train_set[0].features.feature_dim
    if init is None:
        params_a = init_ccm_stage(rng_for(seed, "ccm", modality, "init", "A"),
                                  in_dim, hyper.filters, num_classes)
        params_b = init_ccm_stage(rng_for(seed, "ccm", modality, "init", "B"),
                                  in_dim, hyper.filters, num_classes)
    else:
        params_a, params_b = init
    state_a = SgdState(learning_rate=lr_at(hyper.lr_schedule, start_epoch),
                       momentum=hyper.momentum)
    state_b = SgdState(learning_rate=state_a.learning_rate, momentum=hyper.momentum)
    history: list[dict] = []

    for epoch in range(start_epoch, total_epochs(hyper.lr_schedule)):
        lr = lr_at(hyper.lr_schedule, epoch)
        state_a.learning_rate = lr
        state_b.learning_rate = lr
        order = rng_for(seed, "ccm", modality, "order", epoch).permutation(len(train_set))
        bce_a_sum = 0.0
        bce_b_sum = 0.0
        for batch in batches(order, hyper.batch_size):
            grads_a: dict[str, np.ndarray] = {}
            grads_b: dict[str, np.ndarray] = {}
            scale = 1.0 / len(batch)
            for vid in batch:
                ex = train_set[int(vid)]
                rng = rng_for(seed, "ccm", modality, "sample", epoch, int(vid))
                idx = sample_indices(ex.features, hyper.sampler, rng)
                x = ex.features.stream(modality)[idx].astype(np.float64)
                y = label_vector(ex.labels, num_classes)

                z_a, logits_a, cache_a = _stage_forward_cache(x, params_a)
                loss_a, grad_logits_a = bce_with_logits(logits_a, y, hyper.loss_form)
                if not np.isfinite(loss_a):
                    raise NumericalError(
                        f"stage A loss diverged (epoch {epoch}, video {ex.features.video_id})")
                bce_a_sum += loss_a
                accumulate(grads_a, _stage_backward(cache_a, params_a, grad_logits_a), scale)

                if train_stage_b:
                    tcas_a = Tcas(compute_tcas(z_a, params_a.dense), "A", modality, idx)
                    mask = make_mask(tcas_a, hyper.zeta, ex.labels,
                                     normalize=hyper.normalize_before_mask)
                    x_b = erase_features(x, mask)
                    _, logits_b, cache_b = _stage_forward_cache(x_b, params_b)
                    loss_b, grad_logits_b = bce_with_logits(logits_b, y, hyper.loss_form)
                    if not np.isfinite(loss_b):
                        raise NumericalError(
                            f"stage B loss diverged (epoch {epoch}, video {ex.features.video_id})")
                    bce_b_sum += loss_b
                    accumulate(grads_b, _stage_backward(cache_b, params_b, grad_logits_b), scale)

            add_l2_gradient(grads_a, params_a.trainable(), hyper.lam)
            sgd_step(params_a.trainable(), grads_a, state_a)
            if train_stage_b:
                add_l2_gradient(grads_b, params_b.trainable(), hyper.lam)
                sgd_step(params_b.trainable(), grads_b, state_b)

        history.append({
            "epoch": epoch,
            "lr": lr,
            "bce_a": bce_a_sum / len(train_set),
            "bce_b": bce_b_sum / len(train_set) if train_stage_b else float("nan"),
            "l2_a": hyper.lam * l2_sum(params_a.trainable().values()),
            "l2_b": hyper.lam * l2_sum(params_b.trainable().values()),
        })

    return CcmTrainResult(stage_a=params_a, stage_b=params_b, history=history,
                          epochs_trained=total_epochs(hyper.lr_schedule))
