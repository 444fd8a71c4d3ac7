"""Detection metrics: temporal IoU, per-class average precision, and mAP.

Intervals are inclusive unit ranges, so IoU counts units:
|intersection| / |union|. Matching follows the common detection toolkit
protocol: detections are visited in descending score order, each is assigned
the ground-truth segment (same video, same class) it overlaps most, and counts
as a true positive when that IoU reaches the threshold and the segment is
still unmatched. AP integrates the precision-recall curve with all-points
interpolation. Classes without any ground truth are skipped, not counted as 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError

THUMOS_THRESHOLDS = (0.1, 0.2, 0.3, 0.4, 0.5)
ACTIVITYNET_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))

PRESETS = {
    "thumos": {"thresholds": THUMOS_THRESHOLDS, "average": False},
    "activitynet": {"thresholds": ACTIVITYNET_THRESHOLDS, "average": True},
}


def temporal_iou(a: tuple[int, int], b: tuple[int, int]) -> float:
    """IoU of two inclusive unit intervals; 0 when disjoint."""
    (a_start, a_end), (b_start, b_end) = a, b
    if a_end < a_start or b_end < b_start:
        raise ValidationError("intervals must satisfy start <= end")
    inter = min(a_end, b_end) - max(a_start, b_start) + 1
    if inter <= 0:
        return 0.0
    union = (a_end - a_start + 1) + (b_end - b_start + 1) - inter
    return inter / union


@dataclass(frozen=True)
class Detection:
    video_id: str
    start: int
    end: int
    label: int
    score: float


@dataclass(frozen=True)
class GroundTruth:
    video_id: str
    start: int
    end: int
    label: int


def _sorted_dets(dets: Sequence[Detection]) -> list[Detection]:
    # Deterministic order: score desc, then video id, start, end ascending.
    return sorted(dets, key=lambda d: (-d.score, d.video_id, d.start, d.end))


def average_precision(dets: Sequence[Detection], gts: Sequence[GroundTruth],
                      alpha: float) -> float | None:
    """All-points-interpolated AP for one class; None when the class has no
    ground truth (the caller skips it)."""
    if not gts:
        return None
    gt_by_video: dict[str, list[GroundTruth]] = {}
    for gt in gts:
        gt_by_video.setdefault(gt.video_id, []).append(gt)
    matched: set[tuple[str, int]] = set()
    tp = np.zeros(len(dets))
    for i, det in enumerate(_sorted_dets(dets)):
        candidates = gt_by_video.get(det.video_id, [])
        best_iou, best_j = 0.0, -1
        for j, gt in enumerate(candidates):
            iou = temporal_iou((det.start, det.end), (gt.start, gt.end))
            if iou > best_iou:
                best_iou, best_j = iou, j
        if best_j >= 0 and best_iou >= alpha and (det.video_id, best_j) not in matched:
            matched.add((det.video_id, best_j))
            tp[i] = 1.0
    if len(dets) == 0:
        return 0.0
    cum_tp = np.cumsum(tp)
    recall = cum_tp / len(gts)
    precision = cum_tp / np.arange(1, len(dets) + 1)
    # All-points interpolation: area under the monotone precision envelope.
    mrec = np.concatenate([[0.0], recall, [recall[-1]]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    for k in range(len(mpre) - 2, -1, -1):
        mpre[k] = max(mpre[k], mpre[k + 1])
    steps = np.flatnonzero(mrec[1:] != mrec[:-1]) + 1
    return float(np.sum((mrec[steps] - mrec[steps - 1]) * mpre[steps]))


@dataclass
class EvalReport:
    thresholds: tuple[float, ...]
    per_class_ap: dict[float, dict[int, float]]
    map_at: dict[float, float]
    average_map: float | None
    classes: list[int]

    def to_json_dict(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "classes_evaluated": self.classes,
            "per_class_ap": {f"{a:.2f}": {str(c): ap for c, ap in by_class.items()}
                             for a, by_class in self.per_class_ap.items()},
            "map": {f"{a:.2f}": m for a, m in self.map_at.items()},
            "average_map": self.average_map,
        }

    def format_table(self) -> str:
        header = "alpha " + " ".join(f"c{c:>6d}" for c in self.classes) + "     mAP"
        lines = [header, "-" * len(header)]
        for a in self.thresholds:
            cells = " ".join(f"{self.per_class_ap[a].get(c, float('nan')):7.4f}"
                             for c in self.classes)
            lines.append(f"{a:5.2f} {cells} {self.map_at[a]:7.4f}")
        if self.average_map is not None:
            lines.append(f"average mAP {self.average_map:.4f}")
        return "\n".join(lines)


def evaluate(detections: Sequence[Detection], ground_truth: Sequence[GroundTruth],
             thresholds: Sequence[float], average: bool = False) -> EvalReport:
    """mAP at each threshold over the classes that have ground truth."""
    if not ground_truth:
        raise ValidationError("evaluation needs at least one ground-truth segment")
    thresholds = tuple(float(a) for a in thresholds)
    if any(not 0.0 < a <= 1.0 for a in thresholds):
        raise ValidationError("IoU thresholds must lie in (0, 1]")
    if list(thresholds) != sorted(set(thresholds)):
        raise ValidationError("IoU thresholds must be strictly increasing")
    classes = sorted({gt.label for gt in ground_truth})
    dets_by_class: dict[int, list[Detection]] = {c: [] for c in classes}
    for det in detections:
        if det.label in dets_by_class:
            dets_by_class[det.label].append(det)
    gts_by_class: dict[int, list[GroundTruth]] = {c: [] for c in classes}
    for gt in ground_truth:
        gts_by_class[gt.label].append(gt)

    per_class_ap: dict[float, dict[int, float]] = {}
    map_at: dict[float, float] = {}
    for alpha in thresholds:
        by_class = {}
        for c in classes:
            ap = average_precision(dets_by_class[c], gts_by_class[c], alpha)
            assert ap is not None  # classes come from the gt set
            by_class[c] = ap
        per_class_ap[alpha] = by_class
        map_at[alpha] = float(np.mean(list(by_class.values())))
    average_map = float(np.mean(list(map_at.values()))) if average else None
    return EvalReport(thresholds=thresholds, per_class_ap=per_class_ap,
                      map_at=map_at, average_map=average_map, classes=classes)
