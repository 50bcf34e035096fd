"""Prior samplers for model indicators, model parameters, and baseline designs.

Model parameters carry uniform(0, 1) priors except the WSLTS posterior
temperature, which is log-normal(0, 1).  Model indicators are uniform over
the three models.  Baseline designs draw every reward probability from
Beta(2, 2), the spread typical of bandit experiments in the literature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .designs import Design
from .simulators import MODEL_ARITY, MODEL_NAMES

TASK_MD = "md"
TASK_PE = "pe"

# index of the log-normal temperature inside the wslts parameter vector
WSLTS_LAM_INDEX = 2


def _sample_theta(model: str, n: int, rng: np.random.Generator) -> np.ndarray:
    theta = rng.random((n, MODEL_ARITY[model]))
    if model == "wslts":
        theta[:, WSLTS_LAM_INDEX] = np.exp(rng.standard_normal(n))
    return theta


@dataclass(frozen=True)
class PriorSpec:
    """What the experiment is trying to learn.

    ``task`` is "md" (infer which model generated the data; the parameters
    are nuisance draws marginalized by simulation) or "pe" (infer the
    parameters of the single ``model``).
    """

    task: str
    model: str | None = None
    models: tuple[str, ...] = MODEL_NAMES

    def __post_init__(self):
        if self.task not in (TASK_MD, TASK_PE):
            raise ValueError(f"task must be 'md' or 'pe', got {self.task!r}")
        if self.task == TASK_PE:
            if self.model not in MODEL_NAMES:
                raise ValueError(f"pe task needs a model from {MODEL_NAMES}, got {self.model!r}")
        for m in self.models:
            if m not in MODEL_NAMES:
                raise ValueError(f"unknown model {m!r} in candidate set")

    @property
    def n_models(self) -> int:
        return len(self.models)

    @property
    def theta_dim(self) -> int:
        if self.task != TASK_PE:
            raise ValueError("theta_dim is defined for pe tasks only")
        return MODEL_ARITY[self.model]


@dataclass
class PriorDraw:
    """n i.i.d. draws of the variable of interest plus simulation parameters.

    ``models[i]`` indexes ``spec.models``; ``thetas[m]`` stacks the
    parameter vectors of all samples assigned to model index ``m`` and
    ``positions[m]`` gives their row positions in the overall draw.
    """

    spec: PriorSpec
    models: np.ndarray  # (n,) int
    thetas: dict[int, np.ndarray] = field(repr=False)
    positions: dict[int, np.ndarray] = field(repr=False)

    @property
    def n(self) -> int:
        return self.models.size

    def theta_matrix(self) -> np.ndarray:
        """All parameter vectors in draw order; pe tasks only (fixed arity)."""
        if self.spec.task != TASK_PE:
            raise ValueError("theta_matrix requires a fixed-arity (pe) prior")
        (m,) = self.thetas.keys()
        out = np.empty_like(self.thetas[m])
        out[self.positions[m]] = self.thetas[m]
        return out


def sample_prior(spec: PriorSpec, n: int, rng: np.random.Generator) -> PriorDraw:
    """Draw n samples of the variable of interest (plus nuisance parameters)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if spec.task == TASK_MD:
        models = rng.integers(0, spec.n_models, size=n)
    else:
        models = np.full(n, spec.models.index(spec.model), dtype=np.int64)

    thetas: dict[int, np.ndarray] = {}
    positions: dict[int, np.ndarray] = {}
    for m_idx, m_name in enumerate(spec.models):
        pos = np.flatnonzero(models == m_idx)
        if pos.size == 0:
            continue
        thetas[m_idx] = _sample_theta(m_name, pos.size, rng)
        positions[m_idx] = pos
    return PriorDraw(spec=spec, models=models, thetas=thetas, positions=positions)


def sample_baseline_design(
    n_blocks: int, n_arms: int, rng: np.random.Generator
) -> Design:
    """Baseline design: every reward probability i.i.d. Beta(2, 2)."""
    return Design(rng.beta(2.0, 2.0, size=(n_blocks, n_arms)))
