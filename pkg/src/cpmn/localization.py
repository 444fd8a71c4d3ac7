"""Turning activation sequences into scored temporal detections.

Per modality the cascaded activation sequence (mapped back to full unit
coordinates and min-max normalized per class) is fused with the pyramid
heatmap; per class a threshold at 20% of the fused maximum selects maximal
runs of consecutive units as proposals. Proposals from both modalities are
pooled, scored with the cross-modality mean activation times the class score,
and de-duplicated with greedy per-class NMS.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError
from .evaluation import temporal_iou
from .nnkernel import sigmoid

SCORE_FORMS = ("sigmoid", "literal")


@dataclass
class LocalizationOptions:
    use_mining: bool = True       # fuse stage B into the cascade
    use_pam: bool = True          # multiply by the pyramid heatmap
    score_form: str = "sigmoid"   # "literal" drops the sigmoid on the cascade
    threshold_ratio: float = 0.2  # theta = ratio * max of the fused activation
    nms_threshold: float = 0.3
    top_k: int = 2
    # Erasure at inference is driven only by classes predicted with at least
    # this confidence (top-1 as fallback). A low-score class's normalized
    # activation is dominated by its negative trough, so thresholding it would
    # erase most of the video and starve the mining stage.
    mask_score_floor: float = 0.5

    def __post_init__(self):
        if self.score_form not in SCORE_FORMS:
            raise ValidationError(f"unknown score form {self.score_form!r}")
        if not 0.0 < self.threshold_ratio < 1.0:
            raise ValidationError("threshold ratio must lie in (0, 1)")
        if not 0.0 <= self.nms_threshold <= 1.0:
            raise ValidationError("NMS threshold must lie in [0, 1]")
        if self.top_k < 1:
            raise ValidationError("top_k must be >= 1")


@dataclass
class Proposal:
    start: int
    end: int
    label: int
    p_act: float
    p_class: float
    p_conf: float
    modality: str

    def interval(self) -> tuple[int, int]:
        return self.start, self.end


def map_to_units(values: np.ndarray, indices: np.ndarray, l_u: int) -> np.ndarray:
    """Propagate per-sample activations to every original unit via the nearest
    sampled index (ties go to the earlier sample)."""
    values = np.asarray(values, dtype=np.float64)
    indices = np.asarray(indices)
    if values.shape[0] != indices.shape[0]:
        raise ShapeError("activation rows must match the index map")
    if np.any(np.diff(indices) <= 0):
        raise ValidationError("index map must be strictly increasing")
    if indices[0] < 0 or indices[-1] >= l_u:
        raise ValidationError("index map must lie within [0, l_u)")
    targets = np.arange(l_u)
    right = np.searchsorted(indices, targets, side="left")
    right = np.clip(right, 0, len(indices) - 1)
    left = np.clip(right - 1, 0, len(indices) - 1)
    use_left = np.abs(targets - indices[left]) <= np.abs(indices[right] - targets)
    nearest = np.where(use_left, left, right)
    return values[nearest]


def attention_fuse(cascade: np.ndarray, heatmap: np.ndarray,
                   score_form: str = "sigmoid") -> np.ndarray:
    """Fused activation: sigmoid(cascade) * heatmap (or cascade * heatmap in
    the literal form). With a heatmap in [0, 1] the result stays in [0, 1]."""
    cascade = np.asarray(cascade, dtype=np.float64)
    heatmap = np.asarray(heatmap, dtype=np.float64)
    if cascade.shape != heatmap.shape:
        raise ShapeError(
            f"cascade {cascade.shape} and heatmap {heatmap.shape} must align")
    if score_form == "sigmoid":
        return sigmoid(cascade) * heatmap
    if score_form == "literal":
        return cascade * heatmap
    raise ValidationError(f"unknown score form {score_form!r}")


def select_top_classes(score_vectors: list[np.ndarray],
                       k: int = 2) -> tuple[list[int], dict[int, float]]:
    """Top-k classes by the mean sigmoid score across the given module/modality
    logit vectors; ties break toward the lower class index."""
    if not score_vectors:
        raise ValidationError("need at least one score vector")
    stacked = np.stack([sigmoid(np.asarray(v, dtype=np.float64)) for v in score_vectors])
    mean_scores = stacked.mean(axis=0)
    if mean_scores.shape[0] < k:
        raise ValidationError(f"need at least {k} classes, got {mean_scores.shape[0]}")
    order = np.argsort(-mean_scores, kind="stable")
    chosen = [int(c) for c in order[:k]]
    return chosen, {int(c): float(mean_scores[c]) for c in chosen}


def threshold_runs(values: np.ndarray, threshold: float) -> list[tuple[int, int]]:
    """Maximal runs of consecutive indices with values strictly above threshold."""
    above = np.asarray(values) > threshold
    runs = []
    start = None
    for t, flag in enumerate(above):
        if flag and start is None:
            start = t
        elif not flag and start is not None:
            runs.append((start, t - 1))
            start = None
    if start is not None:
        runs.append((start, len(above) - 1))
    return runs


def extract_proposals(fused: np.ndarray, classes: list[int], modality: str,
                      threshold_ratio: float = 0.2) -> list[tuple[int, int, int, str]]:
    """Candidate (start, end, class, modality) segments: per class, all maximal
    runs above threshold_ratio * max. An all-zero class yields nothing (the
    threshold comparison is strict)."""
    fused = np.asarray(fused, dtype=np.float64)
    if not classes:
        raise ValidationError("proposal extraction needs a non-empty class set")
    out = []
    for c in classes:
        column = fused[:, c]
        theta = threshold_ratio * float(column.max())
        for start, end in threshold_runs(column, theta):
            out.append((start, end, int(c), modality))
    return out


def score_proposal(start: int, end: int, label: int,
                   fused_by_modality: dict[str, np.ndarray],
                   p_class: float, modality: str) -> Proposal:
    """p_act is the mean over the proposal span of the cross-modality average
    fused activation; p_conf = p_act * p_class."""
    sample = next(iter(fused_by_modality.values()))
    if not 0 <= start <= end < sample.shape[0]:
        raise ValidationError(f"proposal ({start}, {end}) outside the video")
    stacked = np.stack([fused[start:end + 1, label]
                        for fused in fused_by_modality.values()])
    p_act = float(stacked.mean())
    return Proposal(start=start, end=end, label=label, p_act=p_act,
                    p_class=float(p_class), p_conf=p_act * float(p_class),
                    modality=modality)


def nms(proposals: list[Proposal], threshold: float) -> list[Proposal]:
    """Greedy per-class suppression: keep the best-scored proposal, drop any
    same-class proposal whose IoU with a kept one exceeds the threshold.
    Ordering ties break by earlier start, then input position."""
    ranked = sorted(range(len(proposals)),
                    key=lambda i: (-proposals[i].p_conf, proposals[i].start, i))
    kept: list[Proposal] = []
    for i in ranked:
        cand = proposals[i]
        suppressed = any(
            kept_p.label == cand.label and
            temporal_iou(kept_p.interval(), cand.interval()) > threshold
            for kept_p in kept)
        if not suppressed:
            kept.append(cand)
    return kept
