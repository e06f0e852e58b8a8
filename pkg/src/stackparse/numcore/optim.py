"""Adagrad with L2 regularization folded into the gradient."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class AdagradState:
    """Per-parameter squared-gradient accumulators plus hyperparameters.

    Accumulators are keyed by parameter name, start at zero, and never
    decrease.
    """

    def __init__(self, learning_rate: float = 0.01, epsilon: float = 1e-8,
                 l2_lambda: float = 1e-6):
        if learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        self.learning_rate = learning_rate
        self.epsilon = epsilon
        self.l2_lambda = l2_lambda
        self.accumulators: dict[str, np.ndarray] = {}

    def apply(self, params: dict[str, Tensor]) -> None:
        """Update tensors in place from their .grad fields (None grads skipped)."""
        names = [name for name, t in params.items() if t.grad is not None]
        adagrad_update(self,
                       {name: params[name].data for name in names},
                       {name: params[name].grad for name in names})


def adagrad_update(state: AdagradState, params: dict[str, np.ndarray],
                   grads: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """One Adagrad step, in place: acc += g^2; p -= lr * g / (sqrt(acc) + eps).

    The L2 term lambda * p is added to the raw gradient first.
    """
    for name, p in params.items():
        g = np.asarray(grads[name])
        if np.isnan(g).any():
            raise FloatingPointError(f"NaN gradient for parameter {name!r}")
        if g.shape != p.shape:
            raise ValueError(f"gradient shape mismatch for {name!r}")
        if state.l2_lambda:
            g = g + state.l2_lambda * p
        acc = state.accumulators.get(name)
        if acc is None:
            acc = np.zeros_like(p)
            state.accumulators[name] = acc
        acc += g * g
        p -= state.learning_rate * g / (np.sqrt(acc) + state.epsilon)
    return params
