"""Run the model-discrimination design search.

Defaults are the full experimental settings (50,000 simulations per
design, 200 epochs, 400-evaluation budget); pass --smoke for a sub-minute
sanity run, or --desk for the reduced scale that still recovers the
extreme-design pattern in a couple of hours on a workstation.
"""

import argparse

from banditboed.config import CampaignConfig
from banditboed.harness import run_design_search

SCALES = {
    "full": {},
    "desk": dict(n_sim=20_000, n_val=4_000, epochs=150, budget_total=200, budget_initial=60),
    "smoke": dict(n_sim=2_000, n_val=400, epochs=50, budget_total=20, budget_initial=10,
                  n_candidates=1024),
}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scale", choices=SCALES, default="full")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--out", default=None)
    parser.add_argument("--parallelism", type=int, default=1)
    args = parser.parse_args()

    out_dir = args.out or f"runs/md_{args.scale}_seed{args.seed}"
    config = CampaignConfig.for_task(
        "md", seed=args.seed, out_dir=out_dir, parallelism=args.parallelism,
        **SCALES[args.scale],
    )
    artifacts = run_design_search(config)
    print(f"\noptimal design:\n{artifacts.design.probs}")
    print(f"estimated utility: {artifacts.value:.4f} nats")
    print(f"artifacts under {artifacts.out_dir}")


if __name__ == "__main__":
    main()
