"""Benchmark script: batched random tile reads against a slide file.

Replicates the measurement loop used for the library's access-rate
numbers: uniformly random stored tiles in batches (10,000 by default),
reporting per-batch throughput and the median in square brackets.

    python -m irisbind.benchmark slide.iris [--batch 10000] [--batches 3]
"""

from __future__ import annotations

import argparse
import json
import sys


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Measure random tile access throughput of a slide file.")
    parser.add_argument("path")
    parser.add_argument("--batch", type=int, default=10_000)
    parser.add_argument("--batches", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--json", action="store_true")
    args = parser.parse_args(argv)

    from irisbind import py_bench

    stats = py_bench(args.path, batch=args.batch, batches=args.batches,
                     seed=args.seed)
    if args.json:
        print(json.dumps(stats, indent=2))
        return 0
    print(f"{args.path}: {stats['non_sparse_count']} stored tiles, "
          f"{args.batches} batches of {args.batch}")
    for name, path_stats in stats["paths"].items():
        rates = " ".join(f"{r:,.0f}" for r in path_stats["batch_rates_tiles_per_s"])
        print(f"  {name:<11} {rates} tiles/sec "
              f"[{path_stats['median_tiles_per_s']:,.0f}]  "
              f"TPT {path_stats['median_tpt_ms']:.4f} ms")
    return 0


if __name__ == "__main__":
    sys.exit(main())
