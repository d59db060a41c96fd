"""Plain SGD with classical momentum and decoupled-from-nothing weight decay.

The update is

    v <- momentum * v + grad + weight_decay * theta
    theta <- theta - lr * v

i.e. L2 decay folded into the gradient before the momentum buffer, which is
the textbook variant. A step where any parameter gradient contains NaN or
Inf is skipped entirely (velocities untouched) and logged; the caller
decides when too many skips mean the run is unsalvageable.
"""

from __future__ import annotations

import logging

import numpy as np

from .autodiff import Tensor

_LOG = logging.getLogger("evipar.optim")


class SgdOptimizer:
    """Momentum SGD over a named parameter dict."""

    def __init__(self, params: dict[str, Tensor], lr: float,
                 weight_decay: float = 0.0, momentum: float = 0.0):
        if not lr > 0.0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        if weight_decay < 0.0:
            raise ValueError(f"weight decay must be >= 0, got {weight_decay}")
        if not 0.0 <= momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {momentum}")
        self.params = params
        self.lr = float(lr)
        self.weight_decay = float(weight_decay)
        self.momentum = float(momentum)
        self.velocity = {name: np.zeros_like(t.data) for name, t in params.items()}
        self.skipped_steps = 0

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None

    def step(self) -> bool:
        """Apply one update. Returns False (and changes nothing) if any
        gradient is non-finite."""
        for name, t in self.params.items():
            if t.grad is not None and not np.all(np.isfinite(t.grad)):
                self.skipped_steps += 1
                _LOG.warning("skipping step: non-finite gradient in %r", name)
                self.zero_grad()
                return False
        for name, t in self.params.items():
            g = t.grad if t.grad is not None else np.zeros_like(t.data)
            v = self.velocity[name]
            v *= self.momentum
            v += g
            if self.weight_decay:
                v += self.weight_decay * t.data
            t.data -= self.lr * v
        self.zero_grad()
        return True
