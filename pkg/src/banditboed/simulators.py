"""Forward simulators for the three bandit choice models.

Each model maps (parameters, design, rng) to a trajectory of arm choices
and Bernoulli rewards.  The batch variants simulate ``n`` independent
agents at once (one parameter vector per agent) and are the workhorses for
dataset generation; the single-trajectory functions are thin wrappers
around them.  Learner state (counts, previous arm, latent state) is reset
at every block boundary, so blocks are independent tasks.

All randomness flows through an explicit ``numpy.random.Generator``; the
same generator state and inputs reproduce the same trajectories exactly.
Random draws are consumed in a fixed per-trial pattern regardless of which
branch an agent takes, which keeps the batch and single paths identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .designs import Design

MODEL_NAMES = ("wslts", "aeg", "gls")
MODEL_ARITY = {"wslts": 3, "aeg": 2, "gls": 5}
DEFAULT_TRIALS = 30

# Reshaped Beta counts are capped here: beyond this the Beta is a point
# mass at its mean to float64 resolution, and huge shapes can overflow.
_RESHAPE_CAP = 1e12


@dataclass(frozen=True)
class Trajectory:
    """Observed data of one simulated agent: choices and rewards per block."""

    choices: np.ndarray  # (B, T) ints in [0, K)
    rewards: np.ndarray  # (B, T) ints in {0, 1}

    def __post_init__(self):
        c = np.asarray(self.choices, dtype=np.int64)
        r = np.asarray(self.rewards, dtype=np.int64)
        if c.shape != r.shape or c.ndim != 2:
            raise ValueError(f"choices {c.shape} and rewards {r.shape} must be equal 2-D shapes")
        if not np.isin(r, (0, 1)).all():
            raise ValueError("rewards must be 0/1")
        if c.min() < 0:
            raise ValueError("choices must be >= 0")
        object.__setattr__(self, "choices", c)
        object.__setattr__(self, "rewards", r)

    @property
    def n_blocks(self) -> int:
        return self.choices.shape[0]

    @property
    def n_trials(self) -> int:
        return self.choices.shape[1]


def _check_unit(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class WsltsParams:
    """Win-stay / lose-Thompson-sample: gamma_w stay-after-win, gamma_l
    shift-after-loss, lam reshapes the per-arm Beta posterior."""

    gamma_w: float
    gamma_l: float
    lam: float

    def __post_init__(self):
        _check_unit("gamma_w", self.gamma_w)
        _check_unit("gamma_l", self.gamma_l)
        if not (self.lam > 0.0 and np.isfinite(self.lam)):
            raise ValueError(f"lam must be positive and finite, got {self.lam}")

    def as_vector(self) -> np.ndarray:
        return np.array([self.gamma_w, self.gamma_l, self.lam], dtype=np.float64)


@dataclass(frozen=True)
class AegParams:
    """Sticky epsilon-greedy: epsilon exploration rate, phi stickiness."""

    epsilon: float
    phi: float

    def __post_init__(self):
        _check_unit("epsilon", self.epsilon)
        _check_unit("phi", self.phi)

    def as_vector(self) -> np.ndarray:
        return np.array([self.epsilon, self.phi], dtype=np.float64)


@dataclass(frozen=True)
class GlsParams:
    """Latent explore/exploit rule follower.

    ``gamma_exec`` is the probability of executing the rule-prescribed
    choice (otherwise a uniformly random arm is chosen).  ``p_exploit``
    is a 2x2 table: ``p_exploit[state, reward]`` gives the probability
    that the NEXT latent state is exploit, given the previous latent
    state (0 = explore, 1 = exploit) and previous reward (0 = loss,
    1 = win).
    """

    gamma_exec: float
    p_exploit: np.ndarray

    def __post_init__(self):
        _check_unit("gamma_exec", self.gamma_exec)
        table = np.asarray(self.p_exploit, dtype=np.float64)
        if table.shape != (2, 2):
            raise ValueError(f"p_exploit must be 2x2, got {table.shape}")
        if not np.all((table >= 0.0) & (table <= 1.0)):
            raise ValueError("p_exploit entries must lie in [0, 1]")
        object.__setattr__(self, "p_exploit", table)

    def as_vector(self) -> np.ndarray:
        """Flattened order: gamma_exec, then p_exploit row-major
        (explore/loss, explore/win, exploit/loss, exploit/win)."""
        return np.concatenate(([self.gamma_exec], self.p_exploit.reshape(-1)))

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "GlsParams":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (5,):
            raise ValueError(f"gls parameter vector must have 5 entries, got {vec.shape}")
        return cls(gamma_exec=float(vec[0]), p_exploit=vec[1:].reshape(2, 2))


def _check_batch_unit(name: str, values: np.ndarray) -> None:
    if values.size and (values.min() < 0.0 or values.max() > 1.0 or not np.all(np.isfinite(values))):
        raise ValueError(f"{name} must lie in [0, 1]")


def _uniform_over_mask(mask: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Pick, per row, a uniformly random column among the True entries.

    Every row must have at least one True entry.  Implemented by ranking
    iid uniform keys restricted to the mask, so ties in the underlying
    scores are broken uniformly at random.
    """
    keys = rng.random(mask.shape)
    keys[~mask] = -1.0
    return np.argmax(keys, axis=1)


# ---------------------------------------------------------------------------
# WSLTS
# ---------------------------------------------------------------------------

def simulate_wslts_batch(
    params: np.ndarray, design: Design, rng: np.random.Generator, n_trials: int = DEFAULT_TRIALS
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate ``n`` WSLTS agents; ``params`` is (n, 3) = (gamma_w, gamma_l, lam).

    Per block the Beta counts reset to (1, 1) per arm.  The first trial
    Thompson-samples from the reshaped Beta(alpha^lam, beta^lam) posterior
    over all arms.  After a win the agent re-selects the previous arm with
    probability gamma_w, otherwise Thompson-samples with the previous
    arm's draw forced to zero; after a loss it Thompson-samples-excluding
    with probability gamma_l, otherwise re-selects the previous arm.
    Counts update on every trial.

    Returns (choices, rewards), each (n, B, T) int8/int64 arrays.
    """
    params = np.asarray(params, dtype=np.float64)
    if params.ndim != 2 or params.shape[1] != 3:
        raise ValueError(f"wslts params must be (n, 3), got {params.shape}")
    gamma_w, gamma_l, lam = params[:, 0], params[:, 1], params[:, 2]
    _check_batch_unit("gamma_w", gamma_w)
    _check_batch_unit("gamma_l", gamma_l)
    if lam.size and (lam.min() <= 0.0 or not np.all(np.isfinite(lam))):
        raise ValueError("lam must be positive and finite")

    n = params.shape[0]
    n_blocks, n_arms = design.n_blocks, design.n_arms
    choices = np.zeros((n, n_blocks, n_trials), dtype=np.int64)
    rewards = np.zeros((n, n_blocks, n_trials), dtype=np.int64)
    rows = np.arange(n)
    lam_col = lam[:, None]

    for b in range(n_blocks):
        alpha = np.ones((n, n_arms))
        beta = np.ones((n, n_arms))
        prev = np.zeros(n, dtype=np.int64)
        prev_win = np.zeros(n, dtype=bool)
        arm_probs = design.probs[b]

        for t in range(n_trials):
            # counts overflow to inf for extreme lam; the cap absorbs it
            with np.errstate(over="ignore"):
                a_shaped = np.minimum(alpha**lam_col, _RESHAPE_CAP)
                b_shaped = np.minimum(beta**lam_col, _RESHAPE_CAP)
            draws = rng.beta(a_shaped, b_shaped)
            if t == 0:
                choice = np.argmax(draws, axis=1)
            else:
                u = rng.random(n)
                stay = np.where(prev_win, u < gamma_w, u >= gamma_l)
                draws[rows, prev] = 0.0
                choice = np.where(stay, prev, np.argmax(draws, axis=1))
            reward = (rng.random(n) < arm_probs[choice]).astype(np.int64)
            alpha[rows, choice] += reward
            beta[rows, choice] += 1 - reward
            choices[:, b, t] = choice
            rewards[:, b, t] = reward
            prev = choice
            prev_win = reward.astype(bool)

    return choices, rewards


def simulate_wslts(
    params: WsltsParams, design: Design, rng: np.random.Generator, n_trials: int = DEFAULT_TRIALS
) -> Trajectory:
    """Simulate one WSLTS agent."""
    c, r = simulate_wslts_batch(params.as_vector()[None, :], design, rng, n_trials)
    return Trajectory(c[0], r[0])


# ---------------------------------------------------------------------------
# AEG
# ---------------------------------------------------------------------------

def simulate_aeg_batch(
    params: np.ndarray, design: Design, rng: np.random.Generator, n_trials: int = DEFAULT_TRIALS
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate ``n`` sticky epsilon-greedy agents; ``params`` is (n, 2) = (epsilon, phi).

    Reward estimates are per-arm posterior means (wins+1)/(pulls+2), reset
    per block.  On exploration choices (probability epsilon) the previous
    arm is chosen with probability phi, else an arm uniformly at random.
    On greedy choices the previous arm is chosen with probability phi when
    it belongs to the argmax set of estimates, the remaining mass spread
    uniformly over the argmax set; when the previous arm is not maximal
    the choice is uniform over the argmax set.  First trial is uniform.
    """
    params = np.asarray(params, dtype=np.float64)
    if params.ndim != 2 or params.shape[1] != 2:
        raise ValueError(f"aeg params must be (n, 2), got {params.shape}")
    epsilon, phi = params[:, 0], params[:, 1]
    _check_batch_unit("epsilon", epsilon)
    _check_batch_unit("phi", phi)

    n = params.shape[0]
    n_blocks, n_arms = design.n_blocks, design.n_arms
    choices = np.zeros((n, n_blocks, n_trials), dtype=np.int64)
    rewards = np.zeros((n, n_blocks, n_trials), dtype=np.int64)
    rows = np.arange(n)

    for b in range(n_blocks):
        wins = np.zeros((n, n_arms))
        pulls = np.zeros((n, n_arms))
        prev = np.zeros(n, dtype=np.int64)
        arm_probs = design.probs[b]

        for t in range(n_trials):
            if t == 0:
                choice = rng.integers(0, n_arms, size=n)
            else:
                # counts are small ints, so equal estimates compare exactly
                estimates = (wins + 1.0) / (pulls + 2.0)
                argmax_mask = estimates == estimates.max(axis=1, keepdims=True)
                explore = rng.random(n) < epsilon
                sticky = rng.random(n) < phi
                uniform_all = rng.integers(0, n_arms, size=n)
                uniform_max = _uniform_over_mask(argmax_mask, rng)
                prev_is_max = argmax_mask[rows, prev]
                explore_choice = np.where(sticky, prev, uniform_all)
                greedy_choice = np.where(sticky & prev_is_max, prev, uniform_max)
                choice = np.where(explore, explore_choice, greedy_choice)
            reward = (rng.random(n) < arm_probs[choice]).astype(np.int64)
            wins[rows, choice] += reward
            pulls[rows, choice] += 1
            choices[:, b, t] = choice
            rewards[:, b, t] = reward
            prev = choice

    return choices, rewards


def simulate_aeg(
    params: AegParams, design: Design, rng: np.random.Generator, n_trials: int = DEFAULT_TRIALS
) -> Trajectory:
    """Simulate one sticky epsilon-greedy agent."""
    c, r = simulate_aeg_batch(params.as_vector()[None, :], design, rng, n_trials)
    return Trajectory(c[0], r[0])


# ---------------------------------------------------------------------------
# GLS
# ---------------------------------------------------------------------------

def gls_rule_candidates(wins: np.ndarray, losses: np.ndarray, exploit_state: np.ndarray) -> np.ndarray:
    """Arms the GLS rule considers equivalent, given win/loss counts.

    ``wins``/``losses`` are (n, K) counts; ``exploit_state`` is (n,) bool.
    Returns an (n, K) boolean mask of candidate arms:

    - Same: two or more arms attain both max wins and min losses -> all
      of them.
    - Better-worse: exactly one such arm -> that arm.
    - Explore-exploit (no such arm): in the exploit state, the arms with
      min losses among the max-wins arms; in the explore state, the arms
      with max wins among the min-losses arms.
    """
    wins = np.asarray(wins, dtype=np.float64)
    losses = np.asarray(losses, dtype=np.float64)
    max_wins = wins == wins.max(axis=1, keepdims=True)
    min_losses = losses == losses.min(axis=1, keepdims=True)
    dominant = max_wins & min_losses

    masked_losses = np.where(max_wins, losses, np.inf)
    exploit_set = max_wins & (masked_losses == masked_losses.min(axis=1, keepdims=True))
    masked_wins = np.where(min_losses, wins, -np.inf)
    explore_set = min_losses & (masked_wins == masked_wins.max(axis=1, keepdims=True))

    dilemma = ~dominant.any(axis=1)[:, None]
    state_set = np.where(exploit_state[:, None], exploit_set, explore_set)
    return np.where(dilemma, state_set, dominant)


def simulate_gls_batch(
    params: np.ndarray, design: Design, rng: np.random.Generator, n_trials: int = DEFAULT_TRIALS,
    return_latent: bool = False,
):
    """Simulate ``n`` GLS agents; ``params`` is (n, 5), see GlsParams.as_vector.

    Per block the win/loss counts reset and the initial latent state is a
    fair coin flip.  Each trial the rule choice (gls_rule_candidates, ties
    uniform) is executed with probability gamma_exec, otherwise an arm is
    drawn uniformly; the next latent state is then sampled from the
    transition table given the current state and observed reward.

    ``return_latent`` additionally returns the (n, B, T) latent exploit
    indicator in force on each trial (diagnostic only).
    """
    params = np.asarray(params, dtype=np.float64)
    if params.ndim != 2 or params.shape[1] != 5:
        raise ValueError(f"gls params must be (n, 5), got {params.shape}")
    gamma_exec = params[:, 0]
    transition = params[:, 1:].reshape(-1, 2, 2)
    _check_batch_unit("gamma_exec", gamma_exec)
    _check_batch_unit("p_exploit", transition)

    n = params.shape[0]
    n_blocks, n_arms = design.n_blocks, design.n_arms
    choices = np.zeros((n, n_blocks, n_trials), dtype=np.int64)
    rewards = np.zeros((n, n_blocks, n_trials), dtype=np.int64)
    latents = np.zeros((n, n_blocks, n_trials), dtype=np.int64) if return_latent else None
    rows = np.arange(n)

    for b in range(n_blocks):
        wins = np.zeros((n, n_arms))
        losses = np.zeros((n, n_arms))
        exploit = rng.random(n) < 0.5
        arm_probs = design.probs[b]

        for t in range(n_trials):
            candidates = gls_rule_candidates(wins, losses, exploit)
            rule_choice = _uniform_over_mask(candidates, rng)
            noise_choice = rng.integers(0, n_arms, size=n)
            executed = rng.random(n) < gamma_exec
            choice = np.where(executed, rule_choice, noise_choice)
            reward = (rng.random(n) < arm_probs[choice]).astype(np.int64)
            wins[rows, choice] += reward
            losses[rows, choice] += 1 - reward
            choices[:, b, t] = choice
            rewards[:, b, t] = reward
            if return_latent:
                latents[:, b, t] = exploit
            exploit = rng.random(n) < transition[rows, exploit.astype(np.int64), reward]

    if return_latent:
        return choices, rewards, latents
    return choices, rewards


def simulate_gls(
    params: GlsParams, design: Design, rng: np.random.Generator, n_trials: int = DEFAULT_TRIALS
) -> Trajectory:
    """Simulate one GLS agent."""
    c, r = simulate_gls_batch(params.as_vector()[None, :], design, rng, n_trials)
    return Trajectory(c[0], r[0])


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

_BATCH_SIMULATORS = {
    "wslts": simulate_wslts_batch,
    "aeg": simulate_aeg_batch,
    "gls": simulate_gls_batch,
}


def simulate_model_batch(
    model: str, params: np.ndarray, design: Design, rng: np.random.Generator,
    n_trials: int = DEFAULT_TRIALS,
) -> tuple[np.ndarray, np.ndarray]:
    """Dispatch batch simulation to the named model, checking arity."""
    if model not in MODEL_NAMES:
        raise ValueError(f"unknown model {model!r}, expected one of {MODEL_NAMES}")
    params = np.atleast_2d(np.asarray(params, dtype=np.float64))
    if params.shape[1] != MODEL_ARITY[model]:
        raise ValueError(
            f"{model} takes {MODEL_ARITY[model]} parameters, got {params.shape[1]}"
        )
    return _BATCH_SIMULATORS[model](params, design, rng, n_trials)


def simulate_model(
    model: str, params: np.ndarray, design: Design, rng: np.random.Generator,
    n_trials: int = DEFAULT_TRIALS,
) -> Trajectory:
    """Simulate one agent of the named model from a flat parameter vector."""
    params = np.asarray(params, dtype=np.float64).reshape(-1)
    c, r = simulate_model_batch(model, params[None, :], design, rng, n_trials)
    return Trajectory(c[0], r[0])
