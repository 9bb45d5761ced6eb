#!/usr/bin/env python3
"""Compare the five toolchain strategies on one synthetic suite."""

import argparse
import time

from starqa import generate_suite, load_cards, run_sweep
from starqa.metrics import format_report


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--n", type=int, default=500)
    parser.add_argument("--workers", type=int, default=4)
    parser.add_argument("--full", action="store_true", help="also print per-strategy tables")
    args = parser.parse_args()

    suite = generate_suite(seed=args.seed, n=args.n)
    registry = load_cards()
    registry.freeze()

    start = time.perf_counter()
    results = run_sweep(suite, registry, seed=args.seed, workers=args.workers)
    elapsed = time.perf_counter() - start

    header = f"{'strategy':<16} {'acc %':>6} {'frames':>7} {'chain':>6} {'distinct':>8} {'shortcut %':>10}"
    print(header)
    print("-" * len(header))
    for name, (_, report) in results.items():
        print(
            f"{name:<16} {report.accuracy_pct:>6.1f} {report.mean_frames:>7.1f} "
            f"{report.mean_toolchain_length:>6.2f} {report.mean_distinct_tools:>8.2f} "
            f"{report.shortcut_rate_pct:>10.1f}"
        )
    print(f"\n{len(suite.items)} episodes x {len(results)} strategies in {elapsed:.1f}s")

    if args.full:
        for name, (_, report) in results.items():
            print(f"\n== {name} ==")
            print(format_report(report))


if __name__ == "__main__":
    main()
