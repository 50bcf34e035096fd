"""Adam with decoupled weight decay, and a plateau learning-rate scheduler."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class TrainingError(RuntimeError):
    """Raised when optimization hits non-finite numbers."""


@dataclass
class AdamState:
    """Moment accumulators for a list of parameter arrays."""

    lr: float = 1e-3
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def ensure_moments(self, params: list[np.ndarray]) -> None:
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
    """One in-place Adam update with bias correction.

    Weight decay is decoupled: an extra -lr * wd * param term, not a
    gradient contribution.  Non-finite gradients abort training.
    """
    state.ensure_moments(params)
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and moments must align")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise TrainingError("non-finite gradient encountered")
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        m_hat = m / bc1
        v_hat = v / bc2
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        if state.weight_decay:
            p -= state.lr * state.weight_decay * p


@dataclass
class PlateauScheduler:
    """Halve the learning rate when the monitored metric stops improving.

    The metric is maximized; any strict improvement resets the counter.
    Once ``patience`` consecutive non-improving steps accumulate, the rate
    is multiplied by ``factor`` (never below ``min_lr``) and the counter
    resets.
    """

    lr: float
    factor: float = 0.5
    patience: int = 25
    min_lr: float = 1e-6
    best: float = -np.inf
    stale_epochs: int = 0
    history: list[float] = field(default_factory=list)

    def step(self, metric: float) -> float:
        """Record one epoch's metric; return the (possibly reduced) rate."""
        if not np.isfinite(metric):
            raise ValueError(f"scheduler metric must be finite, got {metric}")
        self.history.append(float(metric))
        if metric > self.best:
            self.best = float(metric)
            self.stale_epochs = 0
        else:
            self.stale_epochs += 1
            if self.stale_epochs >= self.patience:
                self.lr = max(self.lr * self.factor, self.min_lr)
                self.stale_epochs = 0
        return self.lr
