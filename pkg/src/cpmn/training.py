"""Shared pieces of the two training drivers: learning-rate schedules and
gradient accumulation over video batches."""
from __future__ import annotations

from typing import Iterator, Sequence

import numpy as np

from .errors import ValidationError

# A schedule is a sequence of (epoch_count, learning_rate) phases, e.g. the
# default ((30, 1e-3), (120, 1e-4)) trains 150 epochs total.
Schedule = Sequence[tuple[int, float]]


def total_epochs(schedule: Schedule) -> int:
    return sum(int(n) for n, _ in schedule)


def lr_at(schedule: Schedule, epoch: int) -> float:
    if epoch < 0:
        raise ValidationError("epoch must be >= 0")
    seen = 0
    for count, lr in schedule:
        seen += int(count)
        if epoch < seen:
            return float(lr)
    raise ValidationError(f"epoch {epoch} beyond schedule ({seen} epochs)")


def batches(order: np.ndarray, batch_size: int) -> Iterator[np.ndarray]:
    if batch_size < 1:
        raise ValidationError("batch size must be >= 1")
    for i in range(0, len(order), batch_size):
        yield order[i:i + batch_size]


def accumulate(total: dict[str, np.ndarray], grads: dict[str, np.ndarray],
               scale: float) -> None:
    for name, g in grads.items():
        if name in total:
            total[name] += scale * g
        else:
            total[name] = scale * np.asarray(g, dtype=np.float64)


def add_l2_gradient(total: dict[str, np.ndarray], params: dict[str, np.ndarray],
                    lam: float) -> None:
    """In-place += of d(lam * ||theta||^2)/dtheta."""
    if lam == 0.0:
        return
    for name, p in params.items():
        if name in total:
            total[name] += 2.0 * lam * p
        else:
            total[name] = 2.0 * lam * p.copy()
