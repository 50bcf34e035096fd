"""Command-line entry points: search, evaluate, replay, simulate."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from .config import CampaignConfig, load_config
from .harness import replay, run_design_search, run_evaluation, run_simulate
from .simulators import MODEL_NAMES


def _load_config(args) -> CampaignConfig:
    if args.config:
        config = load_config(args.config)
    else:
        config = CampaignConfig.for_task(args.task) if getattr(args, "task", None) else CampaignConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if getattr(args, "parallelism", None) is not None:
        overrides["parallelism"] = args.parallelism
    return replace(config, **overrides) if overrides else config


def _add_common(parser: argparse.ArgumentParser, with_task: bool = False) -> None:
    parser.add_argument("--config", help="campaign config file (key = value lines)")
    if with_task:
        parser.add_argument(
            "--task", choices=("md", "pe:wslts", "pe:aeg", "pe:gls"),
            help="use built-in defaults for this task instead of --config",
        )
    parser.add_argument("--seed", type=int, help="override the campaign seed")
    parser.add_argument("--out", help="override the output directory")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="banditboed",
        description="Optimal designs for multi-armed bandit experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_search = sub.add_parser("search", help="run the design optimization loop")
    _add_common(p_search, with_task=True)
    p_search.add_argument("--parallelism", type=int, help="workers for the initial phase")
    p_search.add_argument(
        "--resume", metavar="TRACE",
        help="bo_trace.csv (or run dir) whose evaluations seed this search",
    )

    p_eval = sub.add_parser("evaluate", help="score designs by inference quality")
    _add_common(p_eval, with_task=True)
    p_eval.add_argument(
        "--design-source", required=True,
        help="'run:DIR' (finished search), 'explicit:p,p,p;p,p,p', or 'baseline'",
    )
    p_eval.add_argument("--n-test", type=int, required=True, help="test observations per model")
    p_eval.add_argument("--n-baseline", type=int, default=5, help="baseline replicates")
    p_eval.add_argument("--n-posterior", type=int, default=2000, help="posterior prior draws")

    p_replay = sub.add_parser("replay", help="re-execute a run and verify hashes")
    p_replay.add_argument("manifest", help="manifest.json path or run directory")

    p_sim = sub.add_parser("simulate", help="dump raw trajectories")
    _add_common(p_sim, with_task=True)
    p_sim.add_argument("--model", required=True, choices=MODEL_NAMES)
    p_sim.add_argument("--n", type=int, required=True, help="number of simulated agents")
    p_sim.add_argument("--params", help="comma-separated parameter vector (default: prior draws)")
    p_sim.add_argument("--design", help="explicit design 'p,p,p;p,p,p' (default: Beta(2,2) draw)")

    args = parser.parse_args(argv)

    if args.command == "replay":
        report = replay(args.manifest)
        for line in report.lines():
            print(line)
        print("replay: OK" if report.ok else "replay: MISMATCH")
        return 0 if report.ok else 1

    try:
        config = _load_config(args)
        if args.command == "search":
            artifacts = run_design_search(config, resume_from=args.resume)
            print(f"optimal design:\n{artifacts.design.probs}")
            print(f"estimated utility: {artifacts.value:.4f} nats")
            print(f"artifacts: {artifacts.out_dir}")
        elif args.command == "evaluate":
            artifacts = run_evaluation(
                config, args.design_source, args.n_test,
                n_baseline=args.n_baseline, n_posterior=args.n_posterior,
            )
            print(f"artifacts: {artifacts.out_dir}")
        elif args.command == "simulate":
            from .harness import _parse_explicit_design

            design = _parse_explicit_design(args.design, config) if args.design else None
            params = (
                np.array([float(x) for x in args.params.split(",")])
                if args.params else None
            )
            artifacts = run_simulate(
                config, args.model, args.n, config.out_dir, design=design, params=params
            )
            print(f"artifacts: {artifacts.out_dir}")
    except Exception as err:  # surface a clean message, keep partial artifacts
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
