"""SGD with classic Polyak momentum and coupled L2 weight decay.

Update rule per parameter:

    v <- momentum * v + grad + weight_decay * param
    param <- param - learning_rate * v

Decay folds into the gradient (coupled); decoupled variants are out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeMismatchError


@dataclass
class OptimizerState:
    learning_rate: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 2e-4
    velocity: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")


def sgd_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
             state: OptimizerState) -> dict[str, np.ndarray]:
    """Apply one momentum-SGD update in place; returns ``params``.

    Velocity buffers are created lazily, one per parameter name, and live in
    ``state.velocity``. Non-finite gradients abort with the parameter named.
    """
    for name in sorted(params):
        p = params[name]
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeMismatchError(
                f"gradient shape {g.shape} does not match parameter "
                f"'{name}' of shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter '{name}'")
        v = state.velocity.get(name)
        if v is None:
            v = np.zeros_like(p)
        v = state.momentum * v + g + state.weight_decay * p
        state.velocity[name] = v
        p -= state.learning_rate * v
    return params
