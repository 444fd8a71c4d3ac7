"""Plain SGD with optional momentum over named parameter dictionaries.

The training drivers serialize calls to :func:`sgd_step`; forward/backward
passes stay pure, so the single mutation point lives here.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..errors import NumericalError, ShapeError, ValidationError


@dataclass
class SgdState:
    learning_rate: float
    momentum: float = 0.0
    step_count: int = 0
    velocities: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValidationError("learning rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValidationError("momentum must lie in [0, 1)")


def sgd_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray],
             state: SgdState) -> None:
    """Update parameters in place: w <- w - lr * g (or the momentum variant).

    Raises NumericalError with the offending tensor name on non-finite
    gradients so training aborts with a usable diagnostic.
    """
    for name, p in params.items():
        if name not in grads:
            raise ShapeError(f"missing gradient for parameter {name!r}")
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(
                f"gradient shape {g.shape} does not match parameter {name!r} {p.shape}")
        if not np.isfinite(g).all():
            raise NumericalError(
                f"non-finite gradient in {name!r} at step {state.step_count}")
        if state.momentum > 0.0:
            v = state.velocities.get(name)
            if v is None:
                v = np.zeros_like(p)
                state.velocities[name] = v
            v *= state.momentum
            v += g
            p -= state.learning_rate * v
        else:
            p -= state.learning_rate * g
    state.step_count += 1
