"""Create a synthetic slide container and read tiles back.

A slide is a multi-resolution pyramid of 256x256 tiles. This demo
encodes a three-layer procedural slide, opens it, and walks the global
tile index space.
"""

import tempfile
from pathlib import Path

import irisfile as ir

workdir = Path(tempfile.mkdtemp(prefix="iris-demo-"))
path = workdir / "demo.iris"

# Layers run lowest resolution first: 1x1, 2x2 and 4x4 tiles, 21 total.
source = ir.synthetic_source(seed=7, layer_specs=[(1, 1), (2, 2), (4, 4)])
report = ir.encode_slide(source, ir.EncodeParams(worker_count=4), sink=str(path))
print(f"encoded {path}: {report.file_size:,} bytes, "
      f"{report.layout.total_tiles} tiles in {report.elapsed_s:.2f}s")

with ir.open_slide(str(path)) as slide:
    print(slide)
    print("layers:", [(e.x_tiles, e.y_tiles, e.scale) for e in slide.layout.layers])

    # Global indices are layer-major, row-major; locate() inverts them.
    for index in (0, 4, 20):
        layer, x, y = slide.layout.locate(index)
        tile = slide.read_tile(index)
        pixels = tile.to_array()
        print(f"tile {index:2d} -> layer {layer}, x {x}, y {y}: "
              f"shape {pixels.shape}, mean {pixels.mean():6.2f}")

    # The compressed path returns the stored bytes without decoding
    # (for RAW_TEST those are the pixels themselves).
    payload = slide.read_tile_compressed(0)
    print(f"tile 0 payload: {len(payload):,} bytes (zero-copy view)")
