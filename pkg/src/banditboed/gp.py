"""Gaussian-process regression over the design hypercube.

Matern-5/2 kernel with isotropic lengthscale, constant (data-mean) prior
mean, and learned observation noise.  Hyperparameters maximize the log
marginal likelihood by multi-start coordinate pattern search in log
space.  Everything is dense numpy linear algebra with a cached Cholesky
factor; jitter grows geometrically if the covariance loses positive
definiteness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HYPER_BOUNDS = {
    "lengthscale": (0.05, 10.0),
    "signal_var": (1e-4, 100.0),
    "noise_var": (1e-6, 1.0),
}
_BASE_JITTER = 1e-10
_MAX_JITTER = 1e-4


class GpNumericalError(RuntimeError):
    """Covariance could not be factorized even at maximum jitter."""


def matern52(
    x1: np.ndarray, x2: np.ndarray, lengthscale: float, signal_var: float
) -> np.ndarray:
    """Matern-5/2 kernel matrix between row sets x1 (n, D) and x2 (m, D)."""
    x1 = np.atleast_2d(x1)
    x2 = np.atleast_2d(x2)
    sq = np.maximum(
        np.sum(x1**2, axis=1)[:, None]
        + np.sum(x2**2, axis=1)[None, :]
        - 2.0 * x1 @ x2.T,
        0.0,
    )
    r = np.sqrt(sq) / lengthscale
    s5r = np.sqrt(5.0) * r
    return signal_var * (1.0 + s5r + (5.0 / 3.0) * r**2) * np.exp(-s5r)


@dataclass
class GpState:
    """Fitted surrogate: data, hyperparameters, cached factorization."""

    x: np.ndarray  # (n, D) evaluated designs, flattened
    u: np.ndarray  # (n,) noisy utility observations
    lengthscale: float
    signal_var: float
    noise_var: float
    mean: float
    chol: np.ndarray
    alpha: np.ndarray  # solve(K + noise I, u - mean)
    jitter: float

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]


def _chol_with_jitter(k: np.ndarray, noise_var: float) -> tuple[np.ndarray, float]:
    n = k.shape[0]
    jitter = _BASE_JITTER
    base = k + noise_var * np.eye(n)
    while jitter <= _MAX_JITTER:
        try:
            return np.linalg.cholesky(base + jitter * np.eye(n)), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise GpNumericalError(
        f"covariance not positive definite at jitter {_MAX_JITTER:g} "
        f"(n={n}, noise={noise_var:g})"
    )


def gp_build(
    x: np.ndarray,
    u: np.ndarray,
    lengthscale: float,
    signal_var: float,
    noise_var: float,
) -> GpState:
    """Assemble a GP state at explicit hyperparameters."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    if x.shape[0] != u.size:
        raise ValueError(f"{x.shape[0]} inputs but {u.size} observations")
    mean = float(np.mean(u))
    k = matern52(x, x, lengthscale, signal_var)
    chol, jitter = _chol_with_jitter(k, noise_var)
    resid = u - mean
    alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, resid))
    return GpState(
        x=x, u=u,
        lengthscale=lengthscale, signal_var=signal_var, noise_var=noise_var,
        mean=mean, chol=chol, alpha=alpha, jitter=jitter,
    )


def log_marginal_likelihood(
    x: np.ndarray, u: np.ndarray, lengthscale: float, signal_var: float, noise_var: float
) -> float:
    x = np.atleast_2d(x)
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    n = u.size
    resid = u - np.mean(u)
    k = matern52(x, x, lengthscale, signal_var)
    try:
        chol, _ = _chol_with_jitter(k, noise_var)
    except GpNumericalError:
        return -np.inf
    alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, resid))
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return float(-0.5 * resid @ alpha - 0.5 * logdet - 0.5 * n * np.log(2.0 * np.pi))


def _pattern_search(
    objective, start_log: np.ndarray, bounds_log: np.ndarray, max_evals: int = 80
) -> tuple[np.ndarray, float]:
    """Coordinate pattern search in log-hyperparameter space (maximizes)."""
    point = np.clip(start_log, bounds_log[:, 0], bounds_log[:, 1])
    best = objective(point)
    step = 0.5
    evals = 0
    while step > 0.01 and evals < max_evals:
        improved = False
        for dim in range(point.size):
            for direction in (step, -step):
                trial = point.copy()
                trial[dim] = np.clip(trial[dim] + direction, bounds_log[dim, 0], bounds_log[dim, 1])
                if trial[dim] == point[dim]:
                    continue
                value = objective(trial)
                evals += 1
                if value > best:
                    best = value
                    point = trial
                    improved = True
                    break
        if not improved:
            step *= 0.5
    return point, best


def gp_fit(
    x: np.ndarray,
    u: np.ndarray,
    rng: np.random.Generator,
    n_starts: int = 8,
    warm_start: GpState | None = None,
) -> GpState:
    """Fit hyperparameters by maximizing the log marginal likelihood.

    Multi-start coordinate pattern search over log(lengthscale,
    signal_var, noise_var) within HYPER_BOUNDS; one start comes from the
    previous fit when available.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    if u.size < 2:
        raise ValueError("gp_fit needs at least 2 observations")

    bounds_log = np.log(
        np.array(
            [
                HYPER_BOUNDS["lengthscale"],
                HYPER_BOUNDS["signal_var"],
                HYPER_BOUNDS["noise_var"],
            ]
        )
    )

    def objective(log_theta: np.ndarray) -> float:
        ls, sv, nv = np.exp(log_theta)
        return log_marginal_likelihood(x, u, ls, sv, nv)

    u_var = max(float(np.var(u)), 1e-8)
    starts = [np.log([0.5, u_var, max(0.1 * u_var, 1e-5)])]
    if warm_start is not None:
        starts.append(
            np.log([warm_start.lengthscale, warm_start.signal_var, warm_start.noise_var])
        )
    while len(starts) < n_starts:
        starts.append(
            bounds_log[:, 0] + rng.random(3) * (bounds_log[:, 1] - bounds_log[:, 0])
        )

    best_point, best_value = None, -np.inf
    for start in starts:
        point, value = _pattern_search(objective, np.asarray(start), bounds_log)
        if value > best_value:
            best_point, best_value = point, value
    if best_point is None or not np.isfinite(best_value):
        raise GpNumericalError("no hyperparameter setting gave a finite likelihood")
    ls, sv, nv = np.exp(best_point)
    return gp_build(x, u, ls, sv, nv)


def gp_predict(gp: GpState, x_query: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and (noise-free) variance at query rows."""
    x_query = np.atleast_2d(np.asarray(x_query, dtype=np.float64))
    k_star = matern52(gp.x, x_query, gp.lengthscale, gp.signal_var)
    mean = gp.mean + k_star.T @ gp.alpha
    v = np.linalg.solve(gp.chol, k_star)
    var = gp.signal_var - np.sum(v**2, axis=0)
    return mean, np.maximum(var, 0.0)
