"""The scalar critic scoring (variable of interest, trajectory) pairs.

One small sub-network per behavioral block compresses that block's padded
one-hot choice/reward record into a learned summary-statistics vector; the
concatenated summaries plus the encoded variable of interest feed a head
network that outputs a single score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mlp import Mlp, init_mlp
from .priors import TASK_MD, TASK_PE, WSLTS_LAM_INDEX, PriorDraw, PriorSpec
from .simulators import MODEL_ARITY, Trajectory

SUB_HIDDEN = (64, 32)
HEAD_HIDDEN = {TASK_MD: (32, 32), TASK_PE: (64, 32)}
SUMMARY_DIM = {("md", None): 6, ("pe", "wslts"): 8, ("pe", "aeg"): 6, ("pe", "gls"): 8}


def default_summary_dim(task: str, model: str | None) -> int:
    return SUMMARY_DIM[(task, model if task == TASK_PE else None)]


@dataclass(frozen=True)
class TaskEncoding:
    """Fixed input encoding for one experimental task.

    Trajectories: per block, each trial contributes the one-hot choice
    (K values) followed by the reward bit, flattened in trial order, so a
    block becomes T*(K+1) floats.  Variable of interest: a one-hot model
    indicator for model discrimination; the raw parameter vector for
    parameter estimation, with the WSLTS temperature log-transformed so
    the critic sees an unbounded coordinate.
    """

    task: str
    n_arms: int
    n_trials: int
    n_blocks: int
    n_models: int = 3
    model: str | None = None

    def __post_init__(self):
        if self.task not in (TASK_MD, TASK_PE):
            raise ValueError(f"task must be 'md' or 'pe', got {self.task!r}")
        if self.task == TASK_PE and self.model not in MODEL_ARITY:
            raise ValueError(f"pe encoding needs a model, got {self.model!r}")

    @property
    def block_dim(self) -> int:
        return self.n_trials * (self.n_arms + 1)

    @property
    def v_dim(self) -> int:
        if self.task == TASK_MD:
            return self.n_models
        return MODEL_ARITY[self.model]

    def encode_trajectories(self, choices: np.ndarray, rewards: np.ndarray) -> list[np.ndarray]:
        """(n, B, T) choices/rewards -> list of B arrays (n, T*(K+1))."""
        choices = np.asarray(choices)
        rewards = np.asarray(rewards)
        n, n_blocks, n_trials = choices.shape
        if n_blocks != self.n_blocks or n_trials != self.n_trials:
            raise ValueError(
                f"trajectories are {n_blocks}x{n_trials}, encoding expects "
                f"{self.n_blocks}x{self.n_trials}"
            )
        if choices.min() < 0 or choices.max() >= self.n_arms:
            raise ValueError(f"choices out of range for {self.n_arms} arms")
        onehot = np.zeros((n, n_blocks, n_trials, self.n_arms + 1))
        idx = np.indices(choices.shape)
        onehot[idx[0], idx[1], idx[2], choices] = 1.0
        onehot[..., self.n_arms] = rewards
        flat = onehot.reshape(n, n_blocks, self.block_dim)
        return [np.ascontiguousarray(flat[:, b, :]) for b in range(n_blocks)]

    def encode_models(self, models: np.ndarray) -> np.ndarray:
        """(n,) model indices -> (n, n_models) one-hot."""
        models = np.asarray(models, dtype=np.int64)
        if models.min() < 0 or models.max() >= self.n_models:
            raise ValueError(f"model index out of range for {self.n_models} models")
        return np.eye(self.n_models)[models]

    def encode_thetas(self, thetas: np.ndarray) -> np.ndarray:
        """(n, arity) raw parameters -> encoded coordinates."""
        thetas = np.array(thetas, dtype=np.float64, ndmin=2)
        if thetas.shape[1] != MODEL_ARITY[self.model]:
            raise ValueError(f"expected {MODEL_ARITY[self.model]} parameters per row")
        out = thetas.copy()
        if self.model == "wslts":
            out[:, WSLTS_LAM_INDEX] = np.log(out[:, WSLTS_LAM_INDEX])
        return out

    def encode_draw(self, draw: PriorDraw) -> np.ndarray:
        if self.task == TASK_MD:
            return self.encode_models(draw.models)
        return self.encode_thetas(draw.theta_matrix())

    def encode_v(self, v) -> np.ndarray:
        """Encode a single variable of interest as a 1-row matrix."""
        if self.task == TASK_MD:
            return self.encode_models(np.array([v]))
        return self.encode_thetas(np.asarray(v, dtype=np.float64).reshape(1, -1))


def encoding_for_spec(spec: PriorSpec, n_arms: int, n_trials: int, n_blocks: int) -> TaskEncoding:
    return TaskEncoding(
        task=spec.task,
        n_arms=n_arms,
        n_trials=n_trials,
        n_blocks=n_blocks,
        n_models=spec.n_models,
        model=spec.model,
    )


@dataclass
class BoundNetwork:
    """Per-block summary sub-networks plus the scalar head."""

    enc: TaskEncoding
    sub_nets: list[Mlp]
    head: Mlp

    def __post_init__(self):
        if len(self.sub_nets) != self.enc.n_blocks:
            raise ValueError("one sub-network per block required")
        summaries = sum(net.out_dim for net in self.sub_nets)
        expected = summaries + self.enc.v_dim
        if self.head.in_dim != expected:
            raise ValueError(f"head input dim {self.head.in_dim}, expected {expected}")
        if self.head.out_dim != 1:
            raise ValueError("head must output a scalar")

    @property
    def summary_dim(self) -> int:
        return self.sub_nets[0].out_dim

    def parameters(self) -> list[np.ndarray]:
        params: list[np.ndarray] = []
        for net in self.sub_nets:
            params.extend(net.parameters())
        params.extend(self.head.parameters())
        return params

    def forward_summaries(self, y_blocks: list[np.ndarray]) -> tuple[np.ndarray, list]:
        """Run every block through its sub-network; concatenate outputs."""
        if len(y_blocks) != len(self.sub_nets):
            raise ValueError(f"got {len(y_blocks)} blocks, expected {len(self.sub_nets)}")
        outs, caches = [], []
        for net, y in zip(self.sub_nets, y_blocks):
            s, cache = net.forward(y)
            outs.append(s)
            caches.append(cache)
        return np.concatenate(outs, axis=1), caches

    def forward_head(self, summaries: np.ndarray, v_enc: np.ndarray) -> tuple[np.ndarray, list]:
        t, cache = self.head.forward(np.concatenate([summaries, v_enc], axis=1))
        return t[:, 0], cache

    def forward_batch(self, v_enc: np.ndarray, y_blocks: list[np.ndarray]) -> np.ndarray:
        summaries, _ = self.forward_summaries(y_blocks)
        t, _ = self.forward_head(summaries, v_enc)
        return t

    def forward(self, v, y: Trajectory) -> float:
        """Score one (variable of interest, trajectory) pair."""
        v_enc = self.enc.encode_v(v)
        y_blocks = self.enc.encode_trajectories(y.choices[None], y.rewards[None])
        return float(self.forward_batch(v_enc, y_blocks)[0])

    def backward(
        self,
        sub_caches: list,
        head_passes: list[tuple[list, np.ndarray]],
    ) -> list[np.ndarray]:
        """Gradients of a scalar objective through shared block summaries.

        ``head_passes`` pairs each head forward cache with the objective's
        per-sample gradient on that pass's scalar outputs.  Multiple head
        passes (e.g. a joint and a marginal term reusing the same summary
        forward) accumulate into the shared sub-network gradients.
        """
        n_summaries = sum(net.out_dim for net in self.sub_nets)
        head_grads = None
        d_summaries = None
        for cache, d_out in head_passes:
            grads, d_in = self.head.backward(cache, d_out[:, None])
            d_s = d_in[:, :n_summaries]
            if head_grads is None:
                head_grads = grads
                d_summaries = d_s
            else:
                for acc, g in zip(head_grads, grads):
                    acc += g
                d_summaries = d_summaries + d_s

        all_grads: list[np.ndarray] = []
        offset = 0
        for net, cache in zip(self.sub_nets, sub_caches):
            width = net.out_dim
            grads, _ = net.backward(cache, d_summaries[:, offset : offset + width])
            all_grads.extend(grads)
            offset += width
        all_grads.extend(head_grads)
        return all_grads


def build_network(
    enc: TaskEncoding,
    rng: np.random.Generator,
    summary_dim: int | None = None,
    sub_hidden: tuple[int, ...] = SUB_HIDDEN,
    head_hidden: tuple[int, ...] | None = None,
) -> BoundNetwork:
    """Fresh randomly-initialized critic for a task encoding."""
    if summary_dim is None:
        summary_dim = default_summary_dim(enc.task, enc.model)
    if head_hidden is None:
        head_hidden = HEAD_HIDDEN[enc.task]
    sub_nets = [
        init_mlp([enc.block_dim, *sub_hidden, summary_dim], rng)
        for _ in range(enc.n_blocks)
    ]
    head_in = enc.n_blocks * summary_dim + enc.v_dim
    head = init_mlp([head_in, *head_hidden, 1], rng)
    return BoundNetwork(enc=enc, sub_nets=sub_nets, head=head)
