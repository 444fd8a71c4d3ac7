"""Core dataset records.

Features are stored as float32 (matching the on-disk format) and upcast to
float64 at the network boundary. All temporal quantities are unit indices;
seconds are a presentation concern of the CLI.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError

MODALITIES = ("rgb", "flow")


@dataclass
class UnitFeatureSequence:
    """Per-video unit features, split into RGB and flow halves of equal shape."""

    video_id: str
    n_u: int                      # frames per unit (metadata only)
    unit_start_frames: np.ndarray  # uint32, length l_u
    rgb: np.ndarray                # float32, (l_u, G)
    flow: np.ndarray               # float32, (l_u, G)

    def __post_init__(self):
        self.rgb = np.ascontiguousarray(self.rgb, dtype=np.float32)
        self.flow = np.ascontiguousarray(self.flow, dtype=np.float32)
        self.unit_start_frames = np.ascontiguousarray(self.unit_start_frames, dtype=np.uint32)
        if self.rgb.ndim != 2 or self.flow.ndim != 2:
            raise ValidationError("feature blocks must be 2-D (units, feature dim)")
        if self.rgb.shape != self.flow.shape:
            raise ValidationError(
                f"rgb {self.rgb.shape} and flow {self.flow.shape} blocks must match")
        if self.rgb.shape[0] < 1:
            raise ValidationError("feature sequence must contain at least one unit")
        if self.rgb.shape[1] < 1:
            raise ValidationError("feature dimension must be >= 1")
        if self.unit_start_frames.shape != (self.rgb.shape[0],):
            raise ValidationError("unit_start_frames must have one entry per unit")
        if not (np.isfinite(self.rgb).all() and np.isfinite(self.flow).all()):
            raise ValidationError("features must be finite")
        if self.n_u < 1:
            raise ValidationError("frames per unit must be >= 1")

    @property
    def l_u(self) -> int:
        return self.rgb.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.rgb.shape[1]

    def stream(self, modality: str) -> np.ndarray:
        if modality not in MODALITIES:
            raise ValidationError(f"unknown modality {modality!r}")
        return self.rgb if modality == "rgb" else self.flow

    def concatenated(self) -> np.ndarray:
        """(l_u, 2G) view used where both streams matter jointly (shot detection)."""
        return np.concatenate([self.rgb, self.flow], axis=1)


@dataclass
class VideoRecord:
    """Video-level label set, plus ground-truth segments for evaluation only.

    Segments are inclusive unit intervals (start, end, class)."""

    video_id: str
    labels: frozenset[int]
    gt_segments: list[tuple[int, int, int]] | None = None

    def validate_against(self, l_u: int) -> None:
        if self.gt_segments is None:
            return
        for start, end, cls in self.gt_segments:
            if not (0 <= start <= end < l_u):
                raise ValidationError(
                    f"{self.video_id}: segment ({start}, {end}) outside [0, {l_u})")
            if cls not in self.labels:
                raise ValidationError(
                    f"{self.video_id}: segment class {cls} missing from video labels")


@dataclass
class TrainingExample:
    """The only view training code receives: features and video-level labels.

    Segment annotations are structurally absent so weakly supervised training
    cannot reach them."""

    features: UnitFeatureSequence
    labels: frozenset[int]

    def __post_init__(self):
        self.labels = frozenset(int(c) for c in self.labels)
        if not self.labels:
            raise ValidationError(f"{self.features.video_id}: training video needs labels")


def label_vector(labels: frozenset[int], num_classes: int) -> np.ndarray:
    y = np.zeros(num_classes, dtype=np.float64)
    for c in labels:
        if not 0 <= c < num_classes:
            raise ValidationError(f"label {c} outside [0, {num_classes})")
        y[c] = 1.0
    return y
