"""Training the critic at a fixed design and estimating mutual information.

The objective is the classic variational lower bound

    mean T(v, y) over joint pairs  -  e^{-1} * mean exp T(v, y) over
    pairs where v is permuted against y within the batch,

maximized over critic parameters by full-batch Adam ascent (one step per
epoch by default; a minibatch size can be configured).  The marginal-term
permutation is resampled every epoch on the training split and frozen on
the validation split, whose bound at the final epoch is the mutual-
information estimate handed to the design optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .critic import BoundNetwork, TaskEncoding, encoding_for_spec
from .designs import Design
from .optim import AdamState, PlateauScheduler, TrainingError, adam_step
from .priors import PriorSpec, sample_prior
from .simulators import DEFAULT_TRIALS, simulate_model_batch

EXP_CAP = 20.0


@dataclass
class TrainConfig:
    """Hyperparameters of one critic-training run."""

    lr: float = 1e-3
    weight_decay: float = 1e-3
    epochs: int = 200
    scheduler_factor: float = 0.5
    scheduler_patience: int = 25
    min_lr: float = 1e-6
    clamp_cap: float = EXP_CAP
    batch_size: int = 0  # 0 = full batch

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")


@dataclass
class SimulatedDataset:
    """Paired (variable of interest, trajectory) samples at one design."""

    design: Design
    spec: PriorSpec
    enc: TaskEncoding
    v_enc: np.ndarray  # (n, v_dim)
    y_blocks: list[np.ndarray]  # B x (n, block_dim)
    choices: np.ndarray  # (n, B, T)
    rewards: np.ndarray  # (n, B, T)
    models: np.ndarray  # (n,)
    train_idx: np.ndarray
    val_idx: np.ndarray
    val_perm: np.ndarray  # frozen marginal permutation of the val split

    @property
    def n(self) -> int:
        return self.v_enc.shape[0]

    @property
    def n_train(self) -> int:
        return self.train_idx.size

    @property
    def n_val(self) -> int:
        return self.val_idx.size

    def split(self, idx: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        return self.v_enc[idx], [y[idx] for y in self.y_blocks]


def simulate_dataset(
    spec: PriorSpec,
    design: Design,
    n: int,
    rng: np.random.Generator,
    n_trials: int = DEFAULT_TRIALS,
    n_val: int | None = None,
) -> SimulatedDataset:
    """Draw n prior samples and one trajectory each at the given design.

    Datasets are fresh per call and never reused across designs.  A fifth
    of the samples (or ``n_val``) is held out for validation; the val
    split also gets a frozen permutation for its marginal term so that
    repeated bound evaluations of one network are deterministic.
    """
    if n < 2:
        raise ValueError(f"need n >= 2 to split, got {n}")
    if n_val is None:
        n_val = max(1, int(round(n * 0.2)))
    if not (1 <= n_val <= n - 1):
        raise ValueError(f"n_val={n_val} leaves no training data for n={n}")

    draw = sample_prior(spec, n, rng)
    n_blocks, n_trials_ = design.n_blocks, n_trials
    choices = np.zeros((n, n_blocks, n_trials_), dtype=np.int64)
    rewards = np.zeros((n, n_blocks, n_trials_), dtype=np.int64)
    for m_idx in sorted(draw.thetas):
        pos = draw.positions[m_idx]
        c, r = simulate_model_batch(
            spec.models[m_idx], draw.thetas[m_idx], design, rng, n_trials_
        )
        choices[pos] = c
        rewards[pos] = r

    enc = encoding_for_spec(spec, design.n_arms, n_trials_, n_blocks)
    v_enc = enc.encode_draw(draw)
    y_blocks = enc.encode_trajectories(choices, rewards)

    order = rng.permutation(n)
    val_idx = np.sort(order[:n_val])
    train_idx = np.sort(order[n_val:])
    val_perm = rng.permutation(n_val)
    return SimulatedDataset(
        design=design,
        spec=spec,
        enc=enc,
        v_enc=v_enc,
        y_blocks=y_blocks,
        choices=choices,
        rewards=rewards,
        models=draw.models,
        train_idx=train_idx,
        val_idx=val_idx,
        val_perm=val_perm,
    )


def decouple_dataset(data: SimulatedDataset, rng: np.random.Generator) -> SimulatedDataset:
    """Diagnostic control: permute v against y globally, forcing MI = 0.

    The marginals of v and y are untouched; only the pairing is broken,
    which is exactly a simulator that ignores the variable of interest.
    """
    perm = rng.permutation(data.n)
    return SimulatedDataset(
        design=data.design,
        spec=data.spec,
        enc=data.enc,
        v_enc=data.v_enc[perm],
        y_blocks=data.y_blocks,
        choices=data.choices,
        rewards=data.rewards,
        models=data.models[perm],
        train_idx=data.train_idx,
        val_idx=data.val_idx,
        val_perm=data.val_perm,
    )


def nwj_from_scores(
    t_joint: np.ndarray, t_marg: np.ndarray, cap: float = EXP_CAP
) -> tuple[float, int]:
    """Bound value from critic scores; returns (bound, clamped count).

    Scores on the marginal term are clamped at ``cap`` before
    exponentiation to guard against overflow; clamping is counted so
    callers can flag it.
    """
    n_clamped = int(np.count_nonzero(t_marg > cap))
    second = math.exp(-1.0) * float(np.mean(np.exp(np.minimum(t_marg, cap))))
    return float(np.mean(t_joint)) - second, n_clamped


def nwj_bound(
    net: BoundNetwork,
    v_enc: np.ndarray,
    y_blocks: list[np.ndarray],
    perm: np.ndarray,
    cap: float = EXP_CAP,
) -> float:
    """Bound of one paired batch; ``perm`` supplies the marginal pairing."""
    summaries, _ = net.forward_summaries(y_blocks)
    t_joint, _ = net.forward_head(summaries, v_enc)
    t_marg, _ = net.forward_head(summaries, v_enc[perm])
    value, _ = nwj_from_scores(t_joint, t_marg, cap)
    return value


@dataclass
class BoundEstimate:
    """A trained bound value at one design, with its epoch trace."""

    value: float
    design: Design
    best_value: float
    trace: list[tuple[int, float, float, float]] = field(repr=False)  # epoch, train, val, lr
    n_clamped: int = 0


def _bound_and_grads(
    net: BoundNetwork,
    v: np.ndarray,
    y_blocks: list[np.ndarray],
    perm: np.ndarray,
    cap: float,
) -> tuple[float, int, list[np.ndarray]]:
    """One objective evaluation with gradients of the NEGATED bound.

    The block summaries are computed once and shared by the joint and
    marginal head passes; their upstream gradients accumulate.
    """
    n = v.shape[0]
    summaries, sub_caches = net.forward_summaries(y_blocks)
    t_joint, cache_j = net.forward_head(summaries, v)
    t_marg, cache_m = net.forward_head(summaries, v[perm])
    value, n_clamped = nwj_from_scores(t_joint, t_marg, cap)

    # d(-bound)/d t_joint and /d t_marg; clamped scores get zero gradient
    g_joint = np.full(n, -1.0 / n)
    t_capped = np.minimum(t_marg, cap)
    g_marg = math.exp(-1.0) * np.exp(t_capped) / n
    g_marg[t_marg > cap] = 0.0
    grads = net.backward(sub_caches, [(cache_j, g_joint), (cache_m, g_marg)])
    return value, n_clamped, grads


def train_bound(
    net: BoundNetwork,
    data: SimulatedDataset,
    config: TrainConfig,
    rng: np.random.Generator,
) -> tuple[BoundNetwork, BoundEstimate]:
    """Maximize the bound on the training split; returns the estimate.

    One full-batch ascent step per epoch (or minibatches if configured),
    with the marginal permutation resampled each epoch.  The scheduler
    monitors the validation bound; the returned estimate is the
    validation bound at the final epoch, with the best epoch's value kept
    alongside.
    """
    v_train, y_train = data.split(data.train_idx)
    v_val, y_val = data.split(data.val_idx)
    n_train = v_train.shape[0]

    params = net.parameters()
    adam = AdamState(lr=config.lr, weight_decay=config.weight_decay)
    sched = PlateauScheduler(
        lr=config.lr,
        factor=config.scheduler_factor,
        patience=config.scheduler_patience,
        min_lr=config.min_lr,
    )
    trace: list[tuple[int, float, float, float]] = []
    total_clamped = 0

    for epoch in range(1, config.epochs + 1):
        # the epoch's marginal pairing; minibatch mode instead derives one
        # pairing per batch below
        perm = rng.permutation(n_train)
        if config.batch_size and config.batch_size < n_train:
            order = rng.permutation(n_train)
            bounds = []
            for start in range(0, n_train, config.batch_size):
                take = order[start : start + config.batch_size]
                if take.size < 2:
                    continue
                sub_perm = rng.permutation(take.size)
                value, n_clamped, grads = _bound_and_grads(
                    net, v_train[take], [y[take] for y in y_train], sub_perm, config.clamp_cap
                )
                total_clamped += n_clamped
                adam_step(adam, params, grads)
                bounds.append(value)
            train_value = float(np.mean(bounds))
        else:
            train_value, n_clamped, grads = _bound_and_grads(
                net, v_train, y_train, perm, config.clamp_cap
            )
            total_clamped += n_clamped
            adam_step(adam, params, grads)

        if not np.isfinite(train_value):
            raise TrainingError(
                f"non-finite training bound at epoch {epoch} "
                f"(design {data.design.probs.tolist()})"
            )
        val_value = nwj_bound(net, v_val, y_val, data.val_perm, config.clamp_cap)
        if not np.isfinite(val_value):
            raise TrainingError(f"non-finite validation bound at epoch {epoch}")
        adam.lr = sched.step(val_value)
        trace.append((epoch, train_value, val_value, adam.lr))

    estimate = BoundEstimate(
        value=trace[-1][2],
        design=data.design,
        best_value=max(row[2] for row in trace),
        trace=trace,
        n_clamped=total_clamped,
    )
    return net, estimate


def estimate_mi(net: BoundNetwork, data: SimulatedDataset, cap: float = EXP_CAP) -> float:
    """Bound on the held-out split with its frozen marginal permutation."""
    v_val, y_val = data.split(data.val_idx)
    return nwj_bound(net, v_val, y_val, data.val_perm, cap)
