"""Random-access throughput on a 4096-tile slide.

Measures the viewer-style access pattern: batches of uniformly random
tile reads, reported as tiles/second per batch with the median in
square brackets, for both the compressed-byte path and the fully
decoded path.
"""

import tempfile
import time
from pathlib import Path

import irisfile as ir

workdir = Path(tempfile.mkdtemp(prefix="iris-demo-"))
path = workdir / "bench.iris"

start = time.perf_counter()
ir.encode_slide(ir.synthetic_source(seed=11, layer_specs=[(64, 64)]),
                ir.EncodeParams(worker_count=4), sink=str(path))
print(f"encoded 4096-tile slide ({path.stat().st_size / 1e6:.0f} MB) "
      f"in {time.perf_counter() - start:.1f}s")

with ir.open_slide(str(path)) as slide:
    result = ir.bench_random_access(slide, batch_size=1000, batches=5, seed=0)
print(ir.format_report(result))
