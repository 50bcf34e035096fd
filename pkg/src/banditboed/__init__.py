"""Optimal design of multi-armed bandit experiments.

Simulates choice behavior under three cognitive models, trains a neural
lower bound on the mutual information between the experimenter's variable
of interest and the simulated data, optimizes the reward-probability
design with GP-based Bayesian optimization, and recovers amortized
posteriors from the trained critic.
"""

__version__ = "0.1.0"

from .designs import Design
from .simulators import (
    Trajectory,
    WsltsParams,
    AegParams,
    GlsParams,
    simulate_wslts,
    simulate_aeg,
    simulate_gls,
    simulate_model,
    MODEL_NAMES,
)
from .priors import PriorSpec, sample_prior, sample_baseline_design

__all__ = [
    "Design",
    "Trajectory",
    "WsltsParams",
    "AegParams",
    "GlsParams",
    "simulate_wslts",
    "simulate_aeg",
    "simulate_gls",
    "simulate_model",
    "MODEL_NAMES",
    "PriorSpec",
    "sample_prior",
    "sample_baseline_design",
]
