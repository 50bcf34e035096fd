import numpy as np
import pytest

# z for a two-sided test at alpha = 0.001
Z_001 = 3.2905267314919255


def rng_for(*path):
    """Deterministic per-test generator; keep paths unique across tests."""
    from banditboed.rngs import substream

    return substream(20260808, *path)


def assert_binomial_ci(observed_successes, n, p, label=""):
    """Two-sided z-test of a Bernoulli rate at alpha = 0.001."""
    if p in (0.0, 1.0):
        assert observed_successes == (n if p == 1.0 else 0), label
        return
    se = np.sqrt(p * (1.0 - p) / n)
    z = abs(observed_successes / n - p) / se
    assert z < Z_001, f"{label}: rate {observed_successes/n:.4f} vs {p:.4f} (z={z:.2f})"


def assert_chi2(counts, expected_probs, label=""):
    """Chi-squared goodness of fit at alpha = 0.001; pools tiny cells."""
    from scipy.stats import chi2

    counts = np.asarray(counts, dtype=float)
    expected = np.asarray(expected_probs, dtype=float) * counts.sum()
    keep = expected > 5.0
    if (~keep).any():
        counts = np.append(counts[keep], counts[~keep].sum())
        expected = np.append(expected[keep], expected[~keep].sum())
    stat = np.sum((counts - expected) ** 2 / np.maximum(expected, 1e-12))
    dof = max(len(counts) - 1, 1)
    crit = chi2.ppf(0.999, dof)
    assert stat < crit, f"{label}: chi2={stat:.1f} > {crit:.1f} (dof={dof})"


@pytest.fixture
def rng():
    return rng_for("default")


# -- shared trained critics (expensive; train once per session) --------------

TOY_TRAIN_N = 20_000
TOY_TRAIN_EPOCHS = 300
PE_TRAIN_N = 20_000
PE_TRAIN_EPOCHS = 250

PE_OPTIMAL_WSLTS = [[0.0, 1.0, 0.0], [0.0, 1.0, 1.0], [1.0, 0.0, 1.0]]


@pytest.fixture(scope="session")
def toy_critic():
    """Critic trained on the enumerable toy problem (~40 s, shared)."""
    import sys
    from pathlib import Path

    sys.path.insert(0, str(Path(__file__).parent))
    from toy_oracle import train_toy_critic

    return train_toy_critic(n=TOY_TRAIN_N, seed=11, epochs=TOY_TRAIN_EPOCHS)


def train_pe_wslts_critic(design_probs, seed, n=PE_TRAIN_N, epochs=PE_TRAIN_EPOCHS):
    import numpy as np

    from banditboed.critic import build_network
    from banditboed.designs import Design
    from banditboed.mi import TrainConfig, simulate_dataset, train_bound
    from banditboed.priors import PriorSpec
    from banditboed.rngs import substream

    spec = PriorSpec(task="pe", model="wslts")
    design = Design(np.asarray(design_probs, dtype=float))
    data = simulate_dataset(spec, design, n, substream(seed, "pe-sim"))
    net = build_network(data.enc, substream(seed, "pe-init"))
    net, est = train_bound(
        net, data, TrainConfig(epochs=epochs, weight_decay=1e-4), substream(seed, "pe-train")
    )
    return net, est, data


@pytest.fixture(scope="session")
def pe_optimal_critic():
    """Critic trained at the known-good parameter-estimation design."""
    return train_pe_wslts_critic(PE_OPTIMAL_WSLTS, seed=61)
