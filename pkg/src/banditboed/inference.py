"""Amortized posterior recovery from a trained critic.

At the variational optimum the critic equals one plus the log posterior-
to-prior ratio, so prior times exp(score - 1) recovers the posterior up
to normalization.  Everything here self-normalizes (the bound is never
exactly tight), which also makes the estimates invariant to constant
shifts of the critic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .critic import BoundNetwork
from .designs import Design
from .priors import PriorSpec, sample_prior
from .simulators import Trajectory, simulate_model_batch


@dataclass
class PosteriorSample:
    """Self-normalized importance weights over prior parameter draws."""

    values: np.ndarray  # (n, arity) prior draws
    weights: np.ndarray  # (n,) nonnegative, sum to one
    ess: float
    degenerate: bool  # flagged when ess < 1% of n

    @property
    def n(self) -> int:
        return self.weights.size

    def mean(self) -> np.ndarray:
        return self.weights @ self.values

    def std(self) -> np.ndarray:
        center = self.mean()
        return np.sqrt(np.maximum(self.weights @ (self.values - center) ** 2, 0.0))


def _normalized_exp(scores: np.ndarray) -> np.ndarray:
    # exp(T - 1) self-normalized; the shift cancels, subtracting the max
    # keeps the exponentials finite
    shifted = scores - np.max(scores)
    w = np.exp(shifted)
    return w / w.sum()


def posterior_md(net: BoundNetwork, y: Trajectory) -> np.ndarray:
    """Posterior probabilities over the candidate models for one trajectory."""
    n_models = net.enc.n_models
    y_blocks = net.enc.encode_trajectories(y.choices[None], y.rewards[None])
    summaries, _ = net.forward_summaries(y_blocks)
    scores = np.empty(n_models)
    v_all = net.enc.encode_models(np.arange(n_models))
    for m in range(n_models):
        t, _ = net.forward_head(summaries, v_all[m : m + 1])
        scores[m] = t[0]
    # uniform model prior: the prior factor cancels in normalization
    return _normalized_exp(scores)


def posterior_md_batch(net: BoundNetwork, choices: np.ndarray, rewards: np.ndarray) -> np.ndarray:
    """Row-wise model posteriors for a batch of trajectories, (n, n_models)."""
    n = choices.shape[0]
    n_models = net.enc.n_models
    y_blocks = net.enc.encode_trajectories(choices, rewards)
    summaries, _ = net.forward_summaries(y_blocks)
    scores = np.empty((n, n_models))
    v_all = net.enc.encode_models(np.arange(n_models))
    for m in range(n_models):
        t, _ = net.forward_head(summaries, np.repeat(v_all[m : m + 1], n, axis=0))
        scores[:, m] = t
    shifted = scores - scores.max(axis=1, keepdims=True)
    w = np.exp(shifted)
    return w / w.sum(axis=1, keepdims=True)


def posterior_pe(
    net: BoundNetwork, y: Trajectory, prior_draws: np.ndarray
) -> PosteriorSample:
    """Weight the supplied prior draws by the critic's scores for one y.

    Draws come from the prior, so the weights are proportional to
    exp(score - 1) alone.  An effective sample size below 1% of n flags
    the result as degenerate.
    """
    prior_draws = np.atleast_2d(np.asarray(prior_draws, dtype=np.float64))
    v_enc = net.enc.encode_thetas(prior_draws)
    y_blocks = net.enc.encode_trajectories(y.choices[None], y.rewards[None])
    summaries, _ = net.forward_summaries(y_blocks)
    t, _ = net.forward_head(
        np.repeat(summaries, prior_draws.shape[0], axis=0), v_enc
    )
    weights = _normalized_exp(t)
    ess = 1.0 / float(np.sum(weights**2))
    return PosteriorSample(
        values=prior_draws,
        weights=weights,
        ess=ess,
        degenerate=ess < 0.01 * prior_draws.shape[0],
    )


@dataclass
class ConfusionMatrix:
    """Counts and row-normalized rates; rows true model, columns inferred."""

    counts: np.ndarray
    model_names: tuple[str, ...]

    @property
    def rates(self) -> np.ndarray:
        totals = self.counts.sum(axis=1, keepdims=True)
        return self.counts / np.maximum(totals, 1)

    @property
    def n_total(self) -> int:
        return int(self.counts.sum())

    def diagonal_rates(self) -> np.ndarray:
        return np.diag(self.rates)


def confusion_matrix_from_classifier(
    classify, spec: PriorSpec, design: Design, n_test: int,
    rng: np.random.Generator, n_trials: int = 30,
) -> ConfusionMatrix:
    """Tabulate a classifier over fresh simulations, n_test per true model.

    ``classify(choices, rewards) -> (n,) inferred model indices`` receives
    the whole batch of one true model's simulations at once.
    """
    if n_test < 1:
        raise ValueError(f"n_test must be >= 1, got {n_test}")
    n_models = spec.n_models
    counts = np.zeros((n_models, n_models), dtype=np.int64)
    for m_idx, m_name in enumerate(spec.models):
        pe_spec = PriorSpec(task="pe", model=m_name, models=spec.models)
        thetas = sample_prior(pe_spec, n_test, rng).theta_matrix()
        choices, rewards = simulate_model_batch(m_name, thetas, design, rng, n_trials)
        inferred = classify(choices, rewards)
        counts[m_idx] = np.bincount(inferred, minlength=n_models)
    return ConfusionMatrix(counts=counts, model_names=spec.models)


def confusion_matrix(
    net: BoundNetwork, spec: PriorSpec, design: Design, n_test: int,
    rng: np.random.Generator,
) -> ConfusionMatrix:
    """Classify fresh simulations by highest model posterior under ``net``.

    Posterior ties resolve to the lowest model index.
    """
    def classify(choices, rewards):
        probs = posterior_md_batch(net, choices, rewards)
        return np.argmax(probs, axis=1)  # argmax takes the lowest index on ties

    return confusion_matrix_from_classifier(
        classify, spec, design, n_test, rng, n_trials=net.enc.n_trials
    )


def silverman_bandwidth(values: np.ndarray, weights: np.ndarray) -> float:
    """Silverman's rule on weighted samples, using the effective sample size."""
    mean = weights @ values
    var = max(float(weights @ (values - mean) ** 2), 0.0)
    sd = np.sqrt(var)
    order = np.argsort(values)
    cdf = np.cumsum(weights[order])
    q25 = values[order][np.searchsorted(cdf, 0.25)]
    q75 = values[order][np.searchsorted(cdf, 0.75)]
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    ess = 1.0 / float(np.sum(weights**2))
    if spread <= 0.0:
        spread = max(sd, 1e-3)
    return max(0.9 * spread * ess ** (-0.2), 1e-6)


def marginal_density(
    ps: PosteriorSample, coordinate: int, grid: np.ndarray
) -> np.ndarray:
    """Weighted Gaussian KDE of one parameter coordinate on a grid."""
    if ps.ess < 10.0:
        raise ValueError(f"posterior weights too degenerate for a density (ess={ps.ess:.2f})")
    values = ps.values[:, coordinate]
    grid = np.asarray(grid, dtype=np.float64)
    bw = silverman_bandwidth(values, ps.weights)
    z = (grid[:, None] - values[None, :]) / bw
    kernel = np.exp(-0.5 * z**2) / (bw * np.sqrt(2.0 * np.pi))
    return kernel @ ps.weights


def averaged_marginal_density(
    samples: list[PosteriorSample], coordinate: int, grid: np.ndarray
) -> np.ndarray:
    """Mean of per-observation marginal densities over many trajectories."""
    if not samples:
        raise ValueError("need at least one posterior sample")
    return np.mean([marginal_density(ps, coordinate, grid) for ps in samples], axis=0)
