"""Training-time unit sampling strategies.

All samplers return the sampled feature rows together with the strictly
increasing original unit indices, so activation sequences computed on the
sample can be mapped back to full unit coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from .types import UnitFeatureSequence

SAMPLER_MODES = ("uniform", "sparse", "shot")


@dataclass
class SamplerConfig:
    mode: str = "sparse"
    interval: int = 1          # uniform: keep every interval-th unit
    num_segments: int = 64     # sparse: one random unit per segment
    shot_threshold: float = 2.0  # shot: boundary when distance > threshold * median

    def __post_init__(self):
        if self.mode not in SAMPLER_MODES:
            raise ValidationError(f"unknown sampler mode {self.mode!r}")
        if self.interval < 1:
            raise ValidationError("uniform sampling interval must be >= 1")
        if self.num_segments < 1:
            raise ValidationError("sparse sampling needs at least one segment")


def sample_uniform(features: np.ndarray, interval: int) -> tuple[np.ndarray, np.ndarray]:
    """Keep units 0, interval, 2*interval, ...; output length ceil(l_u/interval)."""
    if interval < 1:
        raise ValidationError("interval must be >= 1")
    indices = np.arange(0, features.shape[0], interval)
    return features[indices], indices


def sample_sparse(features: np.ndarray, num_segments: int,
                  rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Split into num_segments equal-length spans and draw one unit from each."""
    l_u = features.shape[0]
    if num_segments > l_u:
        raise ValidationError(
            f"cannot draw {num_segments} segments from {l_u} units")
    bounds = (np.arange(num_segments + 1) * l_u) // num_segments
    indices = np.array([int(rng.integers(bounds[i], bounds[i + 1]))
                        for i in range(num_segments)])
    return features[indices], indices


def shot_boundaries(features: np.ndarray, threshold: float) -> np.ndarray:
    """Indices j where a new shot starts (distance from unit j-1 to j is large).

    "Large" means exceeding threshold times the median consecutive distance;
    with all-equal features there is no boundary and the video is one shot.
    """
    if features.shape[0] < 2:
        return np.array([], dtype=int)
    deltas = np.linalg.norm(np.diff(features.astype(np.float64), axis=0), axis=1)
    cut = threshold * float(np.median(deltas))
    return np.flatnonzero(deltas > cut) + 1


def _medoid(features: np.ndarray, start: int, end: int) -> int:
    """Unit in [start, end) minimizing total L2 distance to the rest (ties: first)."""
    block = features[start:end].astype(np.float64)
    diff = block[:, None, :] - block[None, :, :]
    totals = np.sqrt(np.square(diff).sum(axis=2)).sum(axis=1)
    return start + int(np.argmin(totals))


def sample_shot(features: np.ndarray, threshold: float) -> tuple[np.ndarray, np.ndarray]:
    """One representative (medoid) unit per detected shot."""
    l_u = features.shape[0]
    if l_u < 2:
        raise ValidationError("shot sampling needs at least two units")
    cuts = shot_boundaries(features, threshold)
    edges = np.concatenate([[0], cuts, [l_u]])
    indices = np.array([_medoid(features, int(edges[i]), int(edges[i + 1]))
                        for i in range(len(edges) - 1)])
    return features[indices], indices


def sample_indices(seq: UnitFeatureSequence, config: SamplerConfig,
                   rng: np.random.Generator | None = None) -> np.ndarray:
    """Sampler dispatch on a full video; shot distances use both streams jointly
    so the two modalities share one unit selection."""
    joint = seq.concatenated()
    if config.mode == "uniform":
        _, idx = sample_uniform(joint, config.interval)
    elif config.mode == "sparse":
        if rng is None:
            raise ValidationError("sparse sampling requires an RNG")
        _, idx = sample_sparse(joint, min(config.num_segments, seq.l_u), rng)
    else:
        _, idx = sample_shot(joint, config.shot_threshold)
    return idx
