"""Minimal fully-connected network with exact gradients.

ReLU on hidden layers, identity on the output layer.  Forward passes
return a cache that backward consumes; gradients are plain numpy arrays
in the same layout as the parameters.  No autodiff graph: this family of
architectures is all the project needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Mlp:
    """Weight matrices (fan_in, fan_out) and bias vectors, one per layer."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ValueError("one bias vector per weight matrix required")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[1] != b.shape[0]:
                raise ValueError(f"layer {i}: weight {w.shape} and bias {b.shape} incompatible")
            if i > 0 and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(f"layer {i}: fan-in {w.shape[0]} does not match previous fan-out")

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list, weights and biases interleaved per layer."""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.append(w)
            params.append(b)
        return params

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Return (output, cache); cache holds the input of every layer."""
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(f"expected input (n, {self.in_dim}), got {x.shape}")
        cache = [x]
        h = x
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
            cache.append(h)
        return h, cache

    def backward(self, cache: list[np.ndarray], d_out: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        """Backpropagate per-sample output gradients through the cache.

        Returns (parameter gradients in parameters() layout, gradient with
        respect to the network input).
        """
        grads: list[np.ndarray] = [None] * (2 * self.n_layers)
        delta = d_out
        for i in range(self.n_layers - 1, -1, -1):
            if i < self.n_layers - 1:
                # cache[i+1] holds the post-ReLU activation of layer i
                delta = delta * (cache[i + 1] > 0.0)
            grads[2 * i] = cache[i].T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            delta = delta @ self.weights[i].T
        return grads, delta


def init_mlp(
    dims: list[int], rng: np.random.Generator, dtype=np.float64
) -> Mlp:
    """He-style fan-in uniform initialization; biases start at zero."""
    if len(dims) < 2:
        raise ValueError("need at least an input and an output dimension")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return Mlp(weights=weights, biases=biases)
