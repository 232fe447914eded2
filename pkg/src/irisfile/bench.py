"""Random tile access throughput measurement.

Times batched reads of uniformly random non-sparse tiles, the access
pattern a viewer produces while panning. The compressed path (payload
byte retrieval) and the decoded path (payload plus codec) are measured
separately; each batch reports tiles/second and the summary keeps the
median across batches plus the per-tile presentation time in
milliseconds. A fixed seed makes the index sequence reproducible.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

import numpy as np

from .reader import SPARSE
from .slide import SlideHandle


@dataclass(frozen=True)
class PathStats:
    rates: tuple[float, ...]  # tiles/second, one per batch

    @property
    def median_rate(self) -> float:
        return statistics.median(self.rates)

    @property
    def median_tpt_ms(self) -> float:
        return 1000.0 / self.median_rate

    def to_dict(self) -> dict:
        return {
            "batch_rates_tiles_per_s": [round(r, 1) for r in self.rates],
            "median_tiles_per_s": round(self.median_rate, 1),
            "median_tpt_ms": round(self.median_tpt_ms, 4),
        }


@dataclass(frozen=True)
class BenchResult:
    batch_size: int
    batch_count: int
    seed: int
    tile_count: int
    non_sparse_count: int
    paths: dict[str, PathStats]

    def to_dict(self) -> dict:
        return {
            "batch_size": self.batch_size,
            "batch_count": self.batch_count,
            "seed": self.seed,
            "tile_count": self.tile_count,
            "non_sparse_count": self.non_sparse_count,
            "paths": {name: stats.to_dict() for name, stats in self.paths.items()},
        }


def bench_random_access(handle: SlideHandle, batch_size: int = 10_000,
                        batches: int = 3, seed: int = 0,
                        paths: tuple[str, ...] = ("compressed", "decoded")) -> BenchResult:
    """Measure read throughput over random non-sparse tile indices."""
    if batch_size < 1 or batches < 1:
        raise ValueError("batch_size and batches must be positive")
    pool = np.array([i for i in range(handle.total_tiles)
                     if handle.tile_entry(i) is not SPARSE], dtype=np.int64)
    if len(pool) == 0:
        raise ValueError("slide has no stored tiles to read")

    rng = np.random.default_rng(seed)
    index_batches = [pool[rng.integers(0, len(pool), batch_size)].tolist()
                     for _ in range(batches)]

    readers = {
        "compressed": handle.read_tile_compressed,
        "decoded": handle.read_tile,
    }
    stats: dict[str, PathStats] = {}
    for name in paths:
        read = readers[name]
        rates = []
        for indices in index_batches:
            start = time.perf_counter()
            for index in indices:
                read(index)
            elapsed = time.perf_counter() - start
            rates.append(batch_size / elapsed)
        stats[name] = PathStats(tuple(rates))
    return BenchResult(batch_size, batches, seed, handle.total_tiles,
                       int(len(pool)), stats)


def format_report(result: BenchResult) -> str:
    """Human-readable report; the median rate sits in square brackets."""
    lines = [f"random access over {result.non_sparse_count} stored tiles "
             f"({result.batch_count} batches of {result.batch_size}, seed {result.seed})"]
    for name, stats in result.paths.items():
        rates = " ".join(f"{r:,.0f}" for r in stats.rates)
        lines.append(f"  {name:<11} {rates} tiles/sec [{stats.median_rate:,.0f}]  "
                     f"TPT {stats.median_tpt_ms:.4f} ms")
    return "\n".join(lines)
