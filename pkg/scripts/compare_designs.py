"""Compare inference quality of an optimized design against baselines.

For model discrimination this reports confusion-matrix diagonals; for
parameter estimation, mean posterior standard deviations.  Tables land
under the output directories; this script just orchestrates the two
evaluation runs and prints a summary.
"""

import argparse

import numpy as np

from banditboed.config import CampaignConfig
from banditboed.harness import run_evaluation

DESK = dict(n_sim=20_000, n_val=4_000, epochs=150)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("task", choices=("md", "pe:wslts", "pe:aeg", "pe:gls"))
    parser.add_argument("design_source", help="'run:DIR' or 'explicit:p,p,p;p,p,p'")
    parser.add_argument("--n-test", type=int, default=1000)
    parser.add_argument("--n-baseline", type=int, default=5)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--out", default="runs/compare")
    args = parser.parse_args()

    base_kwargs = dict(seed=args.seed, **DESK)
    config = CampaignConfig.for_task(args.task, out_dir=f"{args.out}/candidate", **base_kwargs)
    candidate = run_evaluation(config, args.design_source, args.n_test)
    baseline_cfg = CampaignConfig.for_task(args.task, out_dir=f"{args.out}/baseline", **base_kwargs)
    baseline = run_evaluation(baseline_cfg, "baseline", args.n_test,
                              n_baseline=args.n_baseline)

    if args.task == "md":
        cand = candidate.tables["confusion"][0].diagonal_rates()
        base = np.mean([cm.diagonal_rates() for cm in baseline.tables["confusion"]], axis=0)
        print(f"candidate diagonal: {np.round(cand, 3)}  (mean {cand.mean():.3f})")
        print(f"baseline  diagonal: {np.round(base, 3)}  (mean {base.mean():.3f})")
    else:
        cand = candidate.tables["posterior_std"][0]
        base = np.mean(baseline.tables["posterior_std"], axis=0)
        print(f"candidate mean posterior std: {np.round(cand, 4)}")
        print(f"baseline  mean posterior std: {np.round(base, 4)}")


if __name__ == "__main__":
    main()
