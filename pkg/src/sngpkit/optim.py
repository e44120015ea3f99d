"""AdamW with decoupled weight decay, plus the multi-step LR schedule."""

from __future__ import annotations

import numpy as np

from .exceptions import TrainingError


def multistep_lr(initial_lr: float, milestones, gamma: float, epoch: int) -> float:
    """initial_lr * gamma ** (number of milestones <= epoch).

    The boundary is inclusive: the drop applies starting at the
    milestone epoch itself.
    """
    if initial_lr <= 0:
        raise ValueError(f"initial_lr must be > 0, got {initial_lr}")
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    ms = list(milestones)
    if any(b <= a for a, b in zip(ms, ms[1:])):
        raise ValueError(f"milestones must be strictly increasing, got {ms}")
    hits = sum(1 for m in ms if epoch >= m)
    return initial_lr * gamma**hits


class AdamW:
    """Adam with decoupled weight decay over a dict of named parameters.

    Update order per step and parameter p with gradient g:

        p <- p - lr * weight_decay * p          (decay first, decoupled)
        m <- b1 m + (1 - b1) g;  v <- b2 v + (1 - b2) g^2
        p <- p - lr * m_hat / (sqrt(v_hat) + eps)

    with bias-corrected m_hat = m / (1 - b1^t), v_hat = v / (1 - b2^t).
    With zero gradient and fresh moments the step reduces to the pure
    decay p * (1 - lr * weight_decay).
    """

    def __init__(
        self,
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        if lr <= 0:
            raise ValueError(f"lr must be > 0, got {lr}")
        b1, b2 = betas
        if not (0 <= b1 < 1 and 0 <= b2 < 1):
            raise ValueError(f"betas must lie in [0, 1), got {betas}")
        if weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {weight_decay}")
        self.lr = float(lr)
        self.betas = (float(b1), float(b2))
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """Apply one update in place. Raises TrainingError on non-finite grads."""
        b1, b2 = self.betas
        self.t += 1
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for name, p in params.items():
            g = grads[name]
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient for parameter {name!r}")
            if self.weight_decay:
                p -= self.lr * self.weight_decay * p
            m = self.m.setdefault(name, np.zeros_like(p))
            v = self.v.setdefault(name, np.zeros_like(p))
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
