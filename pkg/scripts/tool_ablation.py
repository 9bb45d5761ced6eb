#!/usr/bin/env python3
"""Drop tools from the registry one at a time and measure the STAR deltas."""

import argparse

from starqa import generate_suite, load_cards
from starqa.runner import run_ablation

DEFAULT_TOOLS = ("frame_selector", "temporal_grounding", "image_captioner", "google_search")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--n", type=int, default=300)
    parser.add_argument("--workers", type=int, default=4)
    parser.add_argument("--tools", nargs="*", default=list(DEFAULT_TOOLS))
    args = parser.parse_args()

    suite = generate_suite(seed=args.seed, n=args.n)
    registry = load_cards()
    registry.freeze()

    header = f"{'removed tool':<22} {'acc drop':>9} {'frames +':>9}"
    print(header)
    print("-" * len(header))
    for tool in args.tools:
        result = run_ablation(suite, registry, tool, seed=args.seed, workers=args.workers)
        print(
            f"{tool:<22} {result['accuracy_drop_pct']:>+9.1f} "
            f"{result['frames_increase']:>+9.2f}"
        )


if __name__ == "__main__":
    main()
