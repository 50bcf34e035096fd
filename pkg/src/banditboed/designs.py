"""The design variable: per-block, per-arm Bernoulli reward probabilities."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Design:
    """Reward-probability matrix of a bandit task, one row per block.

    ``probs[b, k]`` is the probability that arm ``k`` pays out a reward on
    any trial of block ``b``.  Entries must lie in [0, 1]; at least one
    block and two arms are required.
    """

    probs: np.ndarray = field()

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 2:
            raise ValueError(f"design must be a 2-D matrix, got shape {probs.shape}")
        if probs.shape[0] < 1 or probs.shape[1] < 2:
            raise ValueError(f"design needs >= 1 block and >= 2 arms, got {probs.shape}")
        if not np.all(np.isfinite(probs)) or probs.min() < 0.0 or probs.max() > 1.0:
            raise ValueError("design entries must lie in [0, 1]")
        object.__setattr__(self, "probs", probs)

    @property
    def n_blocks(self) -> int:
        return self.probs.shape[0]

    @property
    def n_arms(self) -> int:
        return self.probs.shape[1]

    def flatten(self) -> np.ndarray:
        return self.probs.reshape(-1).copy()

    @classmethod
    def from_flat(cls, flat: np.ndarray, n_blocks: int, n_arms: int) -> "Design":
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != n_blocks * n_arms:
            raise ValueError(f"expected {n_blocks * n_arms} entries, got {flat.size}")
        return cls(flat.reshape(n_blocks, n_arms))
