"""Gradient-free search for the utility-maximizing design.

Designs live in the unit hypercube (flattened reward-probability
matrices).  A space-filling initial phase seeds a GP surrogate over noisy
utility evaluations; Expected Improvement then proposes one design per
iteration until the budget is spent or the incumbent stops improving.
Each utility evaluation simulates a fresh dataset at the design, trains a
critic on it, and reports the held-out bound.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .critic import BoundNetwork, build_network, encoding_for_spec
from .designs import Design
from .gp import GpState, gp_build, gp_fit, gp_predict
from .mi import TrainConfig, simulate_dataset, train_bound
from .optim import TrainingError
from .priors import PriorSpec
from .rngs import substream
from .simulators import DEFAULT_TRIALS

_SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class BoBudget:
    """Evaluation budget: total utility evaluations and how many are the
    space-filling initial phase; convergence stops the loop early when the
    best observed utility gains no more than ``tol`` over ``window``
    consecutive evaluations."""

    total: int = 400
    initial: int = 80
    window: int = 100
    tol: float = 0.005

    def __post_init__(self):
        if not (1 <= self.initial <= self.total):
            raise ValueError(f"need 1 <= initial <= total, got {self.initial}/{self.total}")


@dataclass
class EvalRecord:
    """One utility evaluation; value is None when the evaluation failed."""

    index: int
    design_flat: np.ndarray
    value: float | None
    incumbent: float
    phase: str  # "initial" | "bo"


@dataclass
class SearchResult:
    design: Design
    value: float
    network: BoundNetwork | None
    trace: list[EvalRecord] = field(repr=False)
    gp: GpState | None = None


def latin_hypercube(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """n stratified points in [0, 1]^dim, one sample per row and stratum."""
    cells = (np.arange(n)[:, None] + rng.random((n, dim))) / n
    for d in range(dim):
        cells[:, d] = cells[rng.permutation(n), d]
    return cells


def ei_from_moments(mean: np.ndarray, sd: np.ndarray, incumbent: float) -> np.ndarray:
    """Closed-form expected improvement of N(mean, sd^2) over incumbent."""
    mean = np.asarray(mean, dtype=np.float64)
    sd = np.asarray(sd, dtype=np.float64)
    improve = mean - incumbent
    deterministic = np.maximum(improve, 0.0)
    ei = deterministic.copy()
    positive = sd > 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        z = improve[positive] / sd[positive]
        pdf = np.exp(-0.5 * z**2) / _SQRT_2PI
        values = sd[positive] * (z * ndtr(z) + pdf)
    # z overflowing to +-inf yields nan/inf; both limits equal the
    # deterministic improvement
    ei[positive] = np.where(np.isfinite(values), values, deterministic[positive])
    return ei


def expected_improvement(gp: GpState, x_query: np.ndarray, incumbent: float) -> np.ndarray:
    """EI of the GP posterior at query points, maximization convention."""
    mean, var = gp_predict(gp, x_query)
    return ei_from_moments(mean, np.sqrt(var), incumbent)


def incumbent_mean(gp: GpState) -> float:
    """Best posterior mean over evaluated designs (robust to noise)."""
    mean, _ = gp_predict(gp, gp.x)
    return float(np.max(mean))


def propose_next(
    gp: GpState,
    rng: np.random.Generator,
    n_candidates: int = 4096,
    refine_steps: int = 50,
) -> np.ndarray:
    """Maximize EI: uniform candidates plus pattern-search refinement."""
    incumbent = incumbent_mean(gp)
    candidates = rng.random((n_candidates, gp.dim))
    ei = expected_improvement(gp, candidates, incumbent)
    best_idx = int(np.argmax(ei))  # ties -> first index
    point = candidates[best_idx].copy()
    best_ei = float(ei[best_idx])

    step = 0.05
    for _ in range(refine_steps):
        improved = False
        for dim in range(gp.dim):
            for direction in (step, -step):
                trial = point.copy()
                trial[dim] = np.clip(trial[dim] + direction, 0.0, 1.0)
                if trial[dim] == point[dim]:
                    continue
                value = float(expected_improvement(gp, trial[None, :], incumbent)[0])
                if value > best_ei:
                    best_ei = value
                    point = trial
                    improved = True
                    break
        if not improved:
            step *= 0.5
            if step < 1e-4:
                break
    return np.clip(point, 0.0, 1.0)


@dataclass(frozen=True)
class EvaluationSetup:
    """Everything a worker needs to score one design."""

    spec: PriorSpec
    n_blocks: int
    n_arms: int
    n_trials: int
    n_sim: int
    n_val: int
    train_config: TrainConfig
    seed: int
    summary_dim: int | None = None
    head_hidden: tuple[int, ...] | None = None


def evaluate_design(setup: EvaluationSetup, design_flat: np.ndarray, index: int):
    """Simulate, train, and score one design; streams derive from (seed, index)."""
    design = Design.from_flat(design_flat, setup.n_blocks, setup.n_arms)
    data = simulate_dataset(
        setup.spec, design, setup.n_sim,
        substream(setup.seed, "sim", index),
        n_trials=setup.n_trials, n_val=setup.n_val,
    )
    enc = encoding_for_spec(setup.spec, setup.n_arms, setup.n_trials, setup.n_blocks)
    net = build_network(
        enc, substream(setup.seed, "init", index),
        summary_dim=setup.summary_dim, head_hidden=setup.head_hidden,
    )
    net, estimate = train_bound(net, data, setup.train_config, substream(setup.seed, "train", index))
    return estimate.value, net, estimate


def _pool_eval(args):
    setup, design_flat, index = args
    try:
        value, net, estimate = evaluate_design(setup, design_flat, index)
        return index, value, net, estimate
    except TrainingError:
        return index, None, None, None


def optimize_design(
    spec: PriorSpec,
    n_blocks: int,
    n_arms: int,
    budget: BoBudget,
    train_config: TrainConfig,
    seed: int,
    n_sim: int = 50_000,
    n_val: int = 10_000,
    n_trials: int = DEFAULT_TRIALS,
    gp_refit_every: int = 5,
    n_candidates: int = 4096,
    summary_dim: int | None = None,
    head_hidden: tuple[int, ...] | None = None,
    evaluate=None,
    on_evaluation=None,
    n_workers: int = 1,
    history: list[EvalRecord] | None = None,
) -> SearchResult:
    """Run the full design search and return the best evaluated design.

    ``evaluate`` may override the utility evaluation (tests, resumed
    replays); it receives (design_flat, index) and returns
    (value, network or None, estimate or None).  ``on_evaluation`` is
    called with (record, network, estimate) after every evaluation, e.g.
    to persist traces.  ``history`` replays prior evaluations (values
    only) so an interrupted search can resume; indices continue after it.
    """
    dim = n_blocks * n_arms
    setup = EvaluationSetup(
        spec=spec, n_blocks=n_blocks, n_arms=n_arms, n_trials=n_trials,
        n_sim=n_sim, n_val=n_val, train_config=train_config, seed=seed,
        summary_dim=summary_dim, head_hidden=head_hidden,
    )
    if evaluate is None:
        def evaluate(design_flat, index):
            return evaluate_design(setup, design_flat, index)

    trace: list[EvalRecord] = list(history) if history else []
    best_value = -np.inf
    best_flat: np.ndarray | None = None
    best_net: BoundNetwork | None = None
    for rec in trace:
        if rec.value is not None and rec.value > best_value:
            best_value, best_flat = rec.value, rec.design_flat

    def record_evaluation(index, flat, value, net, estimate, phase):
        nonlocal best_value, best_flat, best_net
        if value is not None and value > best_value:
            best_value, best_flat, best_net = value, flat, net
        rec = EvalRecord(
            index=index, design_flat=np.asarray(flat, dtype=np.float64),
            value=value, incumbent=best_value, phase=phase,
        )
        trace.append(rec)
        if on_evaluation is not None:
            on_evaluation(rec, net, estimate)

    start = len(trace)
    if start < budget.initial:
        initial_points = latin_hypercube(budget.initial, dim, substream(seed, "lhs"))
        pending = list(range(start, budget.initial))
        if n_workers > 1:
            with multiprocessing.Pool(n_workers) as pool:
                jobs = [(setup, initial_points[i], i) for i in pending]
                for index, value, net, estimate in pool.imap(_pool_eval, jobs):
                    record_evaluation(index, initial_points[index], value, net, estimate, "initial")
        else:
            for i in pending:
                try:
                    value, net, estimate = evaluate(initial_points[i], i)
                except TrainingError:
                    value, net, estimate = None, None, None
                record_evaluation(i, initial_points[i], value, net, estimate, "initial")

    gp: GpState | None = None
    for index in range(max(len(trace), budget.initial), budget.total):
        values = [r.value for r in trace if r.value is not None]
        if len(values) > budget.window:
            window_ago = max(v for v in values[: -budget.window])
            if best_value - window_ago <= budget.tol:
                break

        x = np.array([r.design_flat for r in trace if r.value is not None])
        u = np.array([r.value for r in trace if r.value is not None])
        if x.shape[0] < 2:
            proposal = substream(seed, "bo", index).random(dim)
        else:
            # refit cadence anchored to the evaluation index so the loop is
            # a pure function of (seed, history)
            if gp is None or (index - budget.initial) % gp_refit_every == 0:
                gp = gp_fit(x, u, substream(seed, "gp", index), warm_start=gp)
            else:
                gp = gp_build(x, u, gp.lengthscale, gp.signal_var, gp.noise_var)
            proposal = propose_next(gp, substream(seed, "bo", index), n_candidates)

        try:
            value, net, estimate = evaluate(proposal, index)
        except TrainingError:
            value, net, estimate = None, None, None
        record_evaluation(index, proposal, value, net, estimate, "bo")

    if best_flat is None:
        raise RuntimeError("every utility evaluation failed; no design to return")
    if best_net is None:
        # incumbent's checkpoint was not retained (resume/custom evaluate):
        # retrain at the winning design
        try:
            value, best_net, _ = evaluate(best_flat, budget.total)
        except TrainingError:
            best_net = None

    return SearchResult(
        design=Design.from_flat(best_flat, n_blocks, n_arms),
        value=best_value,
        network=best_net,
        trace=trace,
        gp=gp,
    )
