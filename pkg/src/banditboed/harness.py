"""Campaign drivers: design search, design evaluation, and replay.

Each driver resolves a CampaignConfig into the pipeline calls, persists
every table it produces under the run directory, and finishes by writing
a manifest of content hashes.  ``replay`` re-executes a finished run from
its config snapshot and verifies the hashes.
"""

from __future__ import annotations

import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .artifacts import (
    MANIFEST_NAME,
    load_manifest,
    read_csv,
    sha256_file,
    write_csv,
    write_manifest,
    write_trajectories_csv,
    write_trajectories_npz,
)
from .checkpoint import load_network, save_network
from .config import CampaignConfig, load_config, save_config
from .critic import build_network, encoding_for_spec
from .design_opt import optimize_design
from .designs import Design
from .inference import confusion_matrix, posterior_pe
from .mi import train_bound, simulate_dataset
from .priors import PriorSpec, sample_baseline_design, sample_prior
from .rngs import substream
from .simulators import MODEL_ARITY, Trajectory, simulate_model_batch

CONFIG_SNAPSHOT = "config.snapshot.cfg"
NONDETERMINISTIC_FILES = {"timings.csv"}

PARAM_LABELS = {
    "wslts": ("gamma_w", "gamma_l", "log_lambda"),
    "aeg": ("epsilon", "phi"),
    "gls": (
        "gamma_exec",
        "p_exploit_from_explore_loss",
        "p_exploit_from_explore_win",
        "p_exploit_from_exploit_loss",
        "p_exploit_from_exploit_win",
    ),
}
# coordinates reported on a log axis (heavy-tailed prior)
LOG_COORDS = {"wslts": (2,)}


@dataclass
class RunArtifacts:
    out_dir: Path
    manifest_path: Path
    design: Design | None = None
    value: float | None = None
    tables: dict = field(default_factory=dict)


def _design_columns(n_blocks: int, n_arms: int) -> list[str]:
    return [f"d_b{b}_a{k}" for b in range(n_blocks) for k in range(n_arms)]


def load_bo_trace(path: str | Path, n_blocks: int, n_arms: int):
    """Rebuild evaluation records from a persisted search trace."""
    from .design_opt import EvalRecord

    dim = n_blocks * n_arms
    _, rows = read_csv(path)
    records = []
    for row in rows:
        records.append(
            EvalRecord(
                index=int(row[0]),
                phase=row[1],
                design_flat=np.array([float(v) for v in row[2 : 2 + dim]]),
                value=None if row[2 + dim] == "" else float(row[2 + dim]),
                incumbent=float(row[3 + dim]),
            )
        )
    return records


def run_design_search(
    config: CampaignConfig,
    out_dir: str | Path | None = None,
    resume_from: str | Path | None = None,
) -> RunArtifacts:
    """Optimize the design per the config; persist trace, traces, checkpoint.

    ``resume_from`` replays the evaluations recorded in an earlier run's
    ``bo_trace.csv`` and continues the remaining budget.  On failure the
    partial artifacts stay on disk under a manifest marked failed.
    """
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(config, out / CONFIG_SNAPSHOT)

    spec = config.prior_spec()
    history = None
    if resume_from is not None:
        trace_path = Path(resume_from)
        if trace_path.is_dir():
            trace_path = trace_path / "bo_trace.csv"
        history = load_bo_trace(trace_path, config.n_blocks, config.n_arms)

    bo_rows: list[tuple] = []
    if history:
        bo_rows.extend(
            (r.index, r.phase, *r.design_flat,
             "" if r.value is None else r.value, r.incumbent)
            for r in history
        )
    timing_rows: list[tuple] = []
    last_time = time.monotonic()

    def on_evaluation(rec, net, estimate):
        nonlocal last_time
        now = time.monotonic()
        timing_rows.append((rec.index, now - last_time))
        last_time = now
        if estimate is not None:
            write_csv(
                out / "train_traces" / f"eval_{rec.index:04d}.csv",
                ["epoch", "train_bound", "val_bound", "lr"],
                estimate.trace,
            )
        utility = "" if rec.value is None else rec.value
        bo_rows.append((rec.index, rec.phase, *rec.design_flat, utility, rec.incumbent))

    try:
        result = optimize_design(
            spec,
            config.n_blocks,
            config.n_arms,
            config.budget(),
            config.train_config(),
            config.seed,
            n_sim=config.n_sim,
            n_val=config.n_val,
            n_trials=config.n_trials,
            gp_refit_every=config.gp_refit_every,
            n_candidates=config.n_candidates,
            summary_dim=config.summary_dim,
            head_hidden=config.head_hidden,
            on_evaluation=on_evaluation,
            n_workers=config.parallelism,
            history=history,
        )
    except Exception:
        _flush_search_tables(out, config, bo_rows, timing_rows, None)
        write_manifest(out, "search", {"resumed": history is not None},
                       nondeterministic=NONDETERMINISTIC_FILES, status="failed")
        raise

    _flush_search_tables(out, config, bo_rows, timing_rows, result)
    if result.network is not None:
        save_network(result.network, out / "checkpoints" / "best.bnet")

    manifest_path = write_manifest(
        out, "search", {"resumed": history is not None},
        nondeterministic=NONDETERMINISTIC_FILES,
    )
    return RunArtifacts(
        out_dir=out, manifest_path=manifest_path,
        design=result.design, value=result.value,
    )


def _flush_search_tables(out: Path, config: CampaignConfig, bo_rows, timing_rows, result):
    design_cols = _design_columns(config.n_blocks, config.n_arms)
    write_csv(
        out / "bo_trace.csv",
        ["iteration", "phase", *design_cols, "utility", "incumbent"],
        bo_rows,
    )
    write_csv(out / "timings.csv", ["iteration", "wall_time_s"], timing_rows)
    if result is not None:
        write_csv(
            out / "result.csv",
            [*design_cols, "utility"],
            [(*result.design.flatten(), result.value)],
        )


def _load_run_design(run_dir: Path, config: CampaignConfig):
    header, rows = read_csv(run_dir / "result.csv")
    flat = np.array([float(v) for v in rows[0][:-1]])
    design = Design.from_flat(flat, config.n_blocks, config.n_arms)
    ckpt = run_dir / "checkpoints" / "best.bnet"
    if not ckpt.exists():
        raise FileNotFoundError(f"no checkpoint at {ckpt}; retrain or point at a finished run")
    return design, load_network(ckpt)


def _parse_explicit_design(text: str, config: CampaignConfig) -> Design:
    rows = [[float(x) for x in row.split(",")] for row in text.split(";")]
    design = Design(np.array(rows))
    if design.n_blocks != config.n_blocks or design.n_arms != config.n_arms:
        raise ValueError(
            f"explicit design is {design.n_blocks}x{design.n_arms}, "
            f"config expects {config.n_blocks}x{config.n_arms}"
        )
    return design


def _resolve_designs(
    config: CampaignConfig, design_source: str, n_baseline: int
) -> list[tuple[Design, object | None]]:
    """Yield (design, preloaded network or None) per replicate."""
    if design_source.startswith("run:"):
        design, net = _load_run_design(Path(design_source[4:]), config)
        return [(design, net)]
    if design_source.startswith("explicit:"):
        return [(_parse_explicit_design(design_source[9:], config), None)]
    if design_source == "baseline":
        rng_designs = substream(config.seed, "baseline-designs")
        return [
            (sample_baseline_design(config.n_blocks, config.n_arms, rng_designs), None)
            for _ in range(n_baseline)
        ]
    raise ValueError(
        f"design source must be 'run:DIR', 'explicit:MATRIX' or 'baseline', got {design_source!r}"
    )


def _train_critic_at(config: CampaignConfig, design: Design, tag: int):
    spec = config.prior_spec()
    data = simulate_dataset(
        spec, design, config.n_sim, substream(config.seed, "eval-sim", tag),
        n_trials=config.n_trials, n_val=config.n_val,
    )
    enc = encoding_for_spec(spec, config.n_arms, config.n_trials, config.n_blocks)
    net = build_network(
        enc, substream(config.seed, "eval-init", tag),
        summary_dim=config.summary_dim, head_hidden=config.head_hidden,
    )
    net, estimate = train_bound(
        net, data, config.train_config(), substream(config.seed, "eval-train", tag)
    )
    return net, estimate


def run_evaluation(
    config: CampaignConfig,
    design_source: str,
    n_test: int,
    out_dir: str | Path | None = None,
    n_baseline: int = 5,
    n_posterior: int = 2000,
    density_points: int = 101,
) -> RunArtifacts:
    """Score designs by downstream inference quality; emit CSV tables.

    Model discrimination gets confusion matrices; parameter estimation
    gets posterior standard deviations and averaged marginal densities,
    with ground-truth parameters drawn from the prior.
    """
    if n_test < 1:
        raise ValueError(f"n_test must be >= 1, got {n_test}")
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(config, out / CONFIG_SNAPSHOT)

    spec = config.prior_spec()
    replicates = _resolve_designs(config, design_source, n_baseline)
    design_cols = _design_columns(config.n_blocks, config.n_arms)
    write_csv(
        out / "designs.csv",
        ["replicate", *design_cols],
        [(i, *design.flatten()) for i, (design, _) in enumerate(replicates)],
    )

    tables: dict = {}
    for i, (design, net) in enumerate(replicates):
        if net is None:
            net, _ = _train_critic_at(config, design, i)
        save_network(net, out / "checkpoints" / f"replicate_{i}.bnet")
        if spec.task == "md":
            cm = confusion_matrix(
                net, spec, design, n_test, substream(config.seed, "eval-test", i)
            )
            write_csv(
                out / f"confusion_{i}.csv",
                ["true_model", *[f"inferred_{m}" for m in spec.models],
                 *[f"rate_{m}" for m in spec.models]],
                [
                    (spec.models[r], *cm.counts[r], *cm.rates[r])
                    for r in range(len(spec.models))
                ],
            )
            tables.setdefault("confusion", []).append(cm)
        else:
            tables.setdefault("posterior_std", []).append(
                _evaluate_pe(config, spec, design, net, n_test, n_posterior,
                             density_points, out, i)
            )

    if spec.task == "pe":
        labels = PARAM_LABELS[spec.model]
        write_csv(
            out / "posterior_std.csv",
            ["replicate", "parameter", "mean_posterior_std"],
            [
                (i, labels[j], stds[j])
                for i, stds in enumerate(tables["posterior_std"])
                for j in range(len(labels))
            ],
        )

    manifest_path = write_manifest(
        out, "evaluate",
        {"design_source": design_source, "n_test": n_test, "n_baseline": n_baseline,
         "n_posterior": n_posterior, "density_points": density_points},
    )
    return RunArtifacts(out_dir=out, manifest_path=manifest_path, tables=tables)


def _evaluate_pe(
    config: CampaignConfig, spec: PriorSpec, design: Design, net,
    n_test: int, n_posterior: int, density_points: int, out: Path, replicate: int,
) -> np.ndarray:
    """Posterior std per coordinate (mean over observations) + densities."""
    model = spec.model
    arity = MODEL_ARITY[model]
    log_coords = LOG_COORDS.get(model, ())
    rng_truth = substream(config.seed, "eval-truth", replicate)
    truths = sample_prior(spec, n_test, rng_truth).theta_matrix()
    choices, rewards = simulate_model_batch(model, truths, design, rng_truth, config.n_trials)
    draws = sample_prior(spec, n_posterior, substream(config.seed, "eval-draws", replicate)).theta_matrix()

    grids = []
    for j in range(arity):
        if j in log_coords:
            grids.append(np.linspace(-3.0, 3.0, density_points))
        else:
            grids.append(np.linspace(0.0, 1.0, density_points))

    std_sum = np.zeros(arity)
    density_sum = [np.zeros(density_points) for _ in range(arity)]
    from .inference import marginal_density

    labels = PARAM_LABELS[model]
    for i in range(n_test):
        ps = posterior_pe(net, Trajectory(choices[i], rewards[i]), draws)
        display = ps.values.copy()
        for j in log_coords:
            display[:, j] = np.log(display[:, j])
        mean = ps.weights @ display
        std_sum += np.sqrt(np.maximum(ps.weights @ (display - mean) ** 2, 0.0))
        display_ps = type(ps)(
            values=display, weights=ps.weights, ess=ps.ess, degenerate=ps.degenerate
        )
        for j in range(arity):
            density_sum[j] += marginal_density(display_ps, j, grids[j])
        if i == 0:
            # one full weighted posterior sample per replicate, (values, weight)
            write_csv(
                out / f"posterior_rep{replicate}_obs0.csv",
                [*labels, "weight"],
                np.column_stack([display, ps.weights]),
            )
    for j in range(arity):
        write_csv(
            out / f"density_rep{replicate}_{labels[j]}.csv",
            ["value", "mean_density"],
            zip(grids[j], density_sum[j] / n_test),
        )
    return std_sum / n_test


def run_simulate(
    config: CampaignConfig,
    model: str,
    n: int,
    out_dir: str | Path,
    design: Design | None = None,
    params: np.ndarray | None = None,
) -> RunArtifacts:
    """Dump raw trajectories for one model at a design (params from the
    prior unless given explicitly)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(config, out / CONFIG_SNAPSHOT)
    args = {
        "model": model,
        "n": n,
        "design": None if design is None else design.probs.tolist(),
        "params": None if params is None else np.asarray(params, dtype=float).tolist(),
    }
    if design is None:
        design = sample_baseline_design(
            config.n_blocks, config.n_arms, substream(config.seed, "sim-design")
        )
    if params is None:
        spec = PriorSpec(task="pe", model=model)
        params = sample_prior(spec, n, substream(config.seed, "sim-params")).theta_matrix()
    else:
        params = np.tile(np.asarray(params, dtype=np.float64), (n, 1))
    choices, rewards = simulate_model_batch(
        model, params, design, substream(config.seed, "sim-run"), config.n_trials
    )
    write_trajectories_csv(out / "trajectories.csv", choices, rewards)
    write_trajectories_npz(out / "trajectories.npz", choices, rewards, design.probs)
    write_csv(
        out / "designs.csv",
        ["replicate", *_design_columns(config.n_blocks, config.n_arms)],
        [(0, *design.flatten())],
    )
    manifest_path = write_manifest(out, "simulate", args)
    return RunArtifacts(out_dir=out, manifest_path=manifest_path, design=design)


# -- replay -------------------------------------------------------------------

@dataclass
class ReplayReport:
    ok: bool
    env_mismatch: bool
    recorded_version: str
    files: dict  # relpath -> "match" | "corrupted" | "not_reproduced" | "missing"
    reexecuted: bool = True

    def lines(self) -> list[str]:
        out = []
        if self.env_mismatch:
            out.append(
                f"environment mismatch: run recorded package {self.recorded_version}, "
                f"this build is {__version__}; hashes were not compared"
            )
        if not self.reexecuted and not self.env_mismatch:
            out.append("resumed run: integrity checked against the manifest only")
        for rel in sorted(self.files):
            out.append(f"{self.files[rel]:>14}  {rel}")
        return out


def replay(manifest_path: str | Path) -> ReplayReport:
    """Re-execute a run from its config snapshot and verify content hashes.

    The original directory is also checked against the manifest, so local
    corruption and failed reproduction are reported separately.  A build-
    version difference is reported as an environment mismatch instead of
    file verdicts.
    """
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_NAME
    manifest = load_manifest(manifest_path)
    run_dir = manifest_path.parent

    if manifest["package_version"] != __version__:
        return ReplayReport(
            ok=False, env_mismatch=True,
            recorded_version=manifest["package_version"], files={},
        )

    config = load_config(run_dir / CONFIG_SNAPSHOT)
    command = manifest["command"]
    args = manifest["args"]

    if args.get("resumed"):
        # a resumed run's history is not derivable from the config alone;
        # verify file integrity against the manifest without re-executing
        files = {}
        for rel, info in manifest["files"].items():
            if not info["deterministic"]:
                continue
            original = run_dir / rel
            if not original.exists():
                files[rel] = "missing"
            elif sha256_file(original) != info["sha256"]:
                files[rel] = "corrupted"
            else:
                files[rel] = "match"
        return ReplayReport(
            ok=all(s == "match" for s in files.values()), env_mismatch=False,
            recorded_version=manifest["package_version"], files=files,
            reexecuted=False,
        )

    with tempfile.TemporaryDirectory(prefix="banditboed-replay-") as tmp:
        if command == "search":
            run_design_search(config, out_dir=tmp)
        elif command == "evaluate":
            run_evaluation(
                config, args["design_source"], args["n_test"], out_dir=tmp,
                n_baseline=args["n_baseline"], n_posterior=args["n_posterior"],
                density_points=args["density_points"],
            )
        elif command == "simulate":
            run_simulate(
                config, args["model"], args["n"], out_dir=tmp,
                design=None if args["design"] is None else Design(np.array(args["design"])),
                params=None if args["params"] is None else np.array(args["params"]),
            )
        else:
            raise ValueError(f"cannot replay command {command!r}")

        files = {}
        for rel, info in manifest["files"].items():
            if not info["deterministic"]:
                continue
            original = run_dir / rel
            fresh = Path(tmp) / rel
            if not original.exists():
                files[rel] = "missing"
            elif sha256_file(original) != info["sha256"]:
                files[rel] = "corrupted"
            elif not fresh.exists() or sha256_file(fresh) != info["sha256"]:
                files[rel] = "not_reproduced"
            else:
                files[rel] = "match"

    ok = all(status == "match" for status in files.values())
    return ReplayReport(
        ok=ok, env_mismatch=False,
        recorded_version=manifest["package_version"], files=files,
    )
