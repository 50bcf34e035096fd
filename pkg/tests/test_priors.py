"""Prior sampler tests: supports, moments, determinism."""

import sys
from pathlib import Path

import numpy as np
import pytest

from banditboed.priors import PriorSpec, sample_baseline_design, sample_prior

sys.path.insert(0, str(Path(__file__).parent))
from conftest import rng_for


class TestPriorSpec:
    def test_pe_requires_model(self):
        with pytest.raises(ValueError):
            PriorSpec(task="pe")
        with pytest.raises(ValueError):
            PriorSpec(task="pe", model="nope")

    def test_unknown_task_rejected(self):
        with pytest.raises(ValueError):
            PriorSpec(task="both")

    def test_restricted_model_set(self):
        spec = PriorSpec(task="md", models=("wslts", "aeg"))
        assert spec.n_models == 2


class TestModelIndicatorPrior:
    def test_uniform_categorical(self):
        """Each model's frequency lands within 3 sigma of n/3 at n=30,000."""
        n = 30_000
        draw = sample_prior(PriorSpec(task="md"), n, rng_for("prior-md"))
        counts = np.bincount(draw.models, minlength=3)
        sigma = np.sqrt(n * (1 / 3) * (2 / 3))
        assert np.abs(counts - n / 3).max() < 3 * sigma

    def test_nuisance_parameters_attached(self):
        draw = sample_prior(PriorSpec(task="md"), 500, rng_for("prior-md-theta"))
        total = sum(v.shape[0] for v in draw.thetas.values())
        assert total == 500
        for m_idx, theta in draw.thetas.items():
            arity = {0: 3, 1: 2, 2: 5}[m_idx]
            assert theta.shape[1] == arity


class TestParameterPriors:
    def test_wslts_temperature_median(self):
        """The temperature prior's sample median sits near 1 (log-normal)."""
        n = 50_000
        draw = sample_prior(PriorSpec(task="pe", model="wslts"), n, rng_for("prior-lam"))
        lam = draw.theta_matrix()[:, 2]
        assert (lam > 0).all()
        # median of the sample median: 3 sigma via binomial argument on
        # P(lam < 1) = 1/2: median CI half-width ~ 3*sqrt(n/4) ranks
        below = int((lam < 1.0).sum())
        assert abs(below - n / 2) < 3 * np.sqrt(n / 4)

    def test_unit_interval_supports(self):
        for model, arity in (("aeg", 2), ("gls", 5)):
            draw = sample_prior(PriorSpec(task="pe", model=model), 5000, rng_for("prior", model))
            theta = draw.theta_matrix()
            assert theta.shape == (5000, arity)
            assert theta.min() >= 0.0 and theta.max() <= 1.0

    def test_single_draw_arity(self):
        draw = sample_prior(PriorSpec(task="pe", model="aeg"), 1, rng_for("prior-one"))
        theta = draw.theta_matrix()
        assert theta.shape == (1, 2)
        assert ((0 <= theta) & (theta <= 1)).all()

    def test_n_must_be_positive(self):
        with pytest.raises(ValueError):
            sample_prior(PriorSpec(task="md"), 0, rng_for("prior-zero"))

    def test_reproducible(self):
        a = sample_prior(PriorSpec(task="md"), 100, rng_for("prior-seed"))
        b = sample_prior(PriorSpec(task="md"), 100, rng_for("prior-seed"))
        np.testing.assert_array_equal(a.models, b.models)
        for key in a.thetas:
            np.testing.assert_array_equal(a.thetas[key], b.thetas[key])


class TestBaselineDesign:
    def test_moments(self):
        """Beta(2,2) has mean 1/2 and variance 1/20; check at n=10,000."""
        rng = rng_for("baseline-moments")
        entries = np.concatenate(
            [sample_baseline_design(2, 5, rng).probs.reshape(-1) for _ in range(1000)]
        )
        n = entries.size
        assert n == 10_000
        se_mean = np.sqrt(0.05 / n)
        assert abs(entries.mean() - 0.5) < 3 * se_mean
        # variance of the sample variance for Beta(2,2): use mu4 = 3/560
        mu4 = 3 / 560
        se_var = np.sqrt((mu4 - 0.05**2) / n)
        assert abs(entries.var() - 0.05) < 3 * se_var

    def test_shape_and_range(self):
        design = sample_baseline_design(2, 3, rng_for("baseline-shape"))
        assert design.probs.shape == (2, 3)
        assert design.probs.min() >= 0.0 and design.probs.max() <= 1.0
