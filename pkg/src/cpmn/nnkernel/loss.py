"""Multi-label classification loss with optional L2 penalty.

The binary cross-entropy is computed from logits in log-sum-exp form, so
saturated predictions do not overflow. Two forms exist:

* ``full``: standard BCE with both the positive and negative label terms
  (default; a positives-only objective is degenerate, maximized by predicting
  every class).
* ``positives_only``: only the positive-label term, kept as an ablation knob.
"""
from __future__ import annotations

from typing import Iterable

import numpy as np

from ..errors import ShapeError, ValidationError

LOSS_FORMS = ("full", "positives_only")


def _check(logits: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if logits.shape != labels.shape or logits.ndim != 1:
        raise ShapeError(f"logits {logits.shape} and labels {labels.shape} must be equal rank-1")
    if not np.isin(labels, (0.0, 1.0)).all():
        raise ValidationError("labels must be binary 0/1")
    return logits, labels


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def bce_with_logits(logits: np.ndarray, labels: np.ndarray,
                    form: str = "full") -> tuple[float, np.ndarray]:
    """Summed-over-classes BCE and its gradient wrt the logits."""
    logits, labels = _check(logits, labels)
    softplus_negabs = np.log1p(np.exp(-np.abs(logits)))
    if form == "full":
        per_class = np.maximum(logits, 0.0) - logits * labels + softplus_negabs
        grad = sigmoid(logits) - labels
    elif form == "positives_only":
        # softplus(-s) for positive labels only
        per_class = labels * (np.maximum(-logits, 0.0) + softplus_negabs)
        grad = labels * (sigmoid(logits) - 1.0)
    else:
        raise ValidationError(f"unknown loss form {form!r}")
    return float(per_class.sum()), grad


def l2_sum(params: Iterable[np.ndarray]) -> float:
    """Sum of squared parameter values."""
    return float(sum(float(np.square(p).sum()) for p in params))


def multilabel_loss(logits: np.ndarray, labels: np.ndarray, lam: float,
                    params: Iterable[np.ndarray] = (), form: str = "full") -> float:
    """BCE over all classes plus lam * sum of squared parameters."""
    if lam < 0:
        raise ValidationError("regularization weight must be >= 0")
    data_term, _ = bce_with_logits(logits, labels, form)
    return data_term + lam * l2_sum(params)
