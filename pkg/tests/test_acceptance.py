"""Acceptance suite: one test per release criterion.

Each test is self-contained (fixtures built in-test from fixed seeds),
asserts at the stated tolerance, and enforces its runtime budget. A
verdict line per criterion is printed by the conftest hook.
"""

import struct
import time

import numpy as np
import pytest

import irisfile as ir
from irisfile import wire
from irisfile.validation import ValidationLevel

SEED = 7
LAYERS = [(1, 1), (2, 2), (4, 4)]  # 21 tiles


def fixture_source():
    return ir.synthetic_source(SEED, LAYERS)


@pytest.fixture(scope="module")
def fixture_report(tmp_path_factory):
    path = tmp_path_factory.mktemp("acceptance") / "fixture.iris"
    return ir.encode_slide(fixture_source(), ir.EncodeParams(worker_count=2),
                           sink=str(path))


def test_round_trip_identity(fixture_report):
    start = time.perf_counter()
    source = fixture_source()
    report = ir.validate(fixture_report.origin, ValidationLevel.FULL)
    assert report.findings == []
    with ir.open_slide(fixture_report.origin) as slide:
        assert slide.total_tiles == 21
        for index in range(21):
            layer, x, y = slide.layout.locate(index)
            assert slide.read_tile(index).data == source.tile(layer, x, y).data
    assert time.perf_counter() - start < 10.0


def test_validation_tag_law_and_exhaustive_prefix_mutation(fixture_report):
    start = time.perf_counter()
    with open(fixture_report.origin, "rb") as f:
        data = bytearray(f.read())
    blocks = [r for r in fixture_report.receipts if r.block_type is not None]
    assert len(blocks) == 5  # header, table, extents, offsets, metadata

    # The law itself: the leading u64 of every block is its own offset.
    for receipt in blocks:
        assert ir.get_scalar(data, receipt.offset, 8) == receipt.offset

    # Exhaustive mutation: every prefix byte of every block, every one of
    # the 255 alternative values, must be detected as >= 1 ERROR.
    mutants = killed = 0
    for receipt in blocks:
        for rel in range(wire.PREFIX_SIZE):
            position = receipt.offset + rel
            original = data[position]
            for value in range(256):
                if value == original:
                    continue
                data[position] = value
                mutants += 1
                if not ir.validate(data, ValidationLevel.STRUCTURE).ok:
                    killed += 1
            data[position] = original
    assert mutants == 5 * wire.PREFIX_SIZE * 255
    assert killed == mutants, f"{mutants - killed} undetected mutants"
    elapsed = time.perf_counter() - start
    print(f"\n  {mutants} mutants, 100% detected in {elapsed:.1f}s")
    assert elapsed < 60.0


def _write_extents_block(sink, offset, layers, entry_size, padding):
    size = wire.FIXED_SIZES[ir.BlockType.LAYER_EXTENTS] + entry_size * len(layers)
    buf = bytearray(size)
    wire.BlockPrefix.for_block(offset, ir.BlockType.LAYER_EXTENTS).pack_into(buf, 0)
    wire.ARRAY_HEADER_FIELDS.pack_into(buf, 14, entry_size, len(layers))
    for i, extent in enumerate(layers):
        at = 22 + i * entry_size
        packed = extent.pack()
        buf[at:at + 16] = packed
        buf[at + 16:at + entry_size] = padding * (entry_size - 16)
    sink.write_at(offset, buf)


def _craft_all_sparse_file(entry_size, padding):
    layers = [ir.LayerExtent(1, 1, 1.0), ir.LayerExtent(2, 2, 2.0),
              ir.LayerExtent(4, 4, 4.0)]
    alloc, sink = ir.ReservationAllocator(), ir.BufferSink()
    table_off = alloc.reserve(42)
    extents_off = alloc.reserve(22 + entry_size * 3)
    offsets_off = alloc.reserve(22 + 12 * 21)
    meta_off = alloc.reserve(54)
    _write_extents_block(sink, extents_off, layers, entry_size, padding)
    ir.write_array_block(sink, offsets_off, ir.BlockType.TILE_OFFSETS, 12,
                         [ir.TileOffsetEntry.sparse()] * 21)
    ir.write_header_block(sink, table_off, ir.BlockType.TILE_TABLE,
                          ir.TileTable(extents_off, offsets_off,
                                       int(ir.EncodingFormat.RAW_TEST),
                                       int(ir.PixelFormat.R8G8B8), 3))
    ir.write_header_block(sink, meta_off, ir.BlockType.CLINICAL_METADATA,
                          ir.ClinicalMetadata())
    ir.finalize(sink, alloc.cursor, table_off, meta_off)
    return sink.getvalue(), extents_off


def test_forward_compatible_inflated_entry_size():
    canonical, canonical_extents = _craft_all_sparse_file(16, b"\x00")
    inflated, inflated_extents = _craft_all_sparse_file(24, b"\xAB")
    assert ir.validate(canonical).findings == []
    assert ir.validate(inflated).findings == []

    with ir.open_view(canonical) as view:
        canonical_layers = list(ir.read_array(view, canonical_extents,
                                              ir.BlockType.LAYER_EXTENTS))
    with ir.open_view(inflated) as view:
        array = ir.read_array(view, inflated_extents, ir.BlockType.LAYER_EXTENTS)
        assert array.entry_size == 24
        inflated_layers = list(array)
    assert inflated_layers == canonical_layers
    assert inflated_layers == [ir.LayerExtent(1, 1, 1.0), ir.LayerExtent(2, 2, 2.0),
                               ir.LayerExtent(4, 4, 4.0)]


def test_parallel_write_equivalence():
    start = time.perf_counter()
    decoded = {}
    for workers in (1, 4, 16):
        report = ir.encode_slide(fixture_source(),
                                 ir.EncodeParams(worker_count=workers))
        assert ir.validate(report.buffer).findings == []

        ranges = sorted((r.offset, r.size) for r in report.receipts)
        for (a_off, a_size), (b_off, _) in zip(ranges, ranges[1:]):
            assert a_off + a_size <= b_off, "reserved ranges overlap"

        with ir.open_slide(report.buffer) as slide:
            decoded[workers] = [slide.read_tile(i).data for i in range(21)]
    assert decoded[1] == decoded[4] == decoded[16]
    assert time.perf_counter() - start < 30.0


def test_recovery_header_zeroing_and_truncation(fixture_report, tmp_path):
    start = time.perf_counter()
    with open(fixture_report.origin, "rb") as f:
        pristine = f.read()
    source = fixture_source()

    # Header destroyed: every other block is found and everything decodes.
    damaged = bytearray(pristine)
    damaged[0:46] = bytes(46)
    with ir.open_view(bytes(damaged)) as view:
        candidates = ir.scan_candidates(view)
    surviving = {(r.offset, r.block_type) for r in fixture_report.receipts
                 if r.block_type not in (None, ir.BlockType.FILE_HEADER)}
    assert {(c.offset, c.block_type) for c in candidates} == surviving

    salvaged_path = tmp_path / "salvaged.iris"
    report = ir.repair(bytes(damaged), str(salvaged_path))
    assert report.tiles_salvaged == 21 and report.tiles_lost == 0
    assert ir.validate(str(salvaged_path)).findings == []
    with ir.open_slide(str(salvaged_path)) as slide:
        for index in range(21):
            layer, x, y = slide.layout.locate(index)
            assert slide.read_tile(index).data == source.tile(layer, x, y).data

    # Truncation at 90%: exactly the tiles wholly below the cut survive.
    cut = int(len(pristine) * 0.9)
    with ir.open_slide(pristine) as slide:
        below = sum(1 for i in range(21)
                    if (e := slide.tile_entry(i)) is not ir.SPARSE
                    and e.tile_offset + e.tile_size <= cut)
    truncated_path = tmp_path / "truncated_salvage.iris"
    report = ir.repair(pristine[:cut], str(truncated_path))
    assert report.tiles_salvaged == below
    assert report.tiles_lost == 21 - below
    assert ir.validate(str(truncated_path)).ok
    assert time.perf_counter() - start < 30.0


def test_false_positive_resistance():
    rng = np.random.default_rng(0xC0FFEE)
    noise = rng.integers(0, 256, 1 << 20, dtype=np.uint8).tobytes()
    with ir.open_view(noise) as view:
        assert ir.scan_candidates(view) == []


def test_global_index_bijection_randomized():
    rng = np.random.default_rng(2024)
    for _ in range(40):
        layer_count = int(rng.integers(1, 7))
        dims = [(int(rng.integers(1, 7)), int(rng.integers(1, 7)))
                for _ in range(layer_count)]
        layout = ir.PyramidLayout(tuple(
            ir.LayerExtent(x, y, float(2 ** i)) for i, (x, y) in enumerate(dims)))

        # Brute-force enumerator: layer-major from the lowest-resolution
        # layer, row-major within a layer, upper-left tile first.
        enumerated = [(layer, x, y)
                      for layer, (x_tiles, y_tiles) in enumerate(dims)
                      for y in range(y_tiles)
                      for x in range(x_tiles)]
        assert layout.total_tiles == len(enumerated)
        for position, (layer, x, y) in enumerate(enumerated):
            assert layout.global_index(layer, x, y) == position
            assert layout.locate(position) == (layer, x, y)


def test_annotation_geometry_worked_example():
    source = ir.synthetic_source(
        1, [(2, 2), (4, 4)],
        annotations=[ir.AnnotationInput(1, ir.AnnotationType.TEXT_UTF8,
                                        x=0.73, y=0.1, width=1.0, height=0.5,
                                        raster_width=64, raster_height=32,
                                        payload=b"mark")])
    report = ir.encode_slide(source)
    with ir.open_slide(report.buffer) as slide:
        # A 2x2 layer 0 spans slide space [0.0, 2.0] on both axes.
        assert slide.layout.slide_space_size == (2.0, 2.0)
        note = slide.read_annotation(1)
        assert struct.pack("<f", note.x) == struct.pack("<f", 0.73)
        mapped = ir.to_view_pixels(
            ir.SlideSpaceRect(note.x, note.y, note.width, note.height),
            slide.tile_dimension, 1.0)
    ulp = float(np.spacing(np.float32(0.73 * 256)))
    assert abs(mapped.x - 0.73 * 256) <= ulp
    assert mapped.width == 256.0


def test_throughput_sanity(tmp_path):
    start = time.perf_counter()
    path = tmp_path / "bench4096.iris"
    ir.encode_slide(ir.synthetic_source(11, [(64, 64)]),
                    ir.EncodeParams(worker_count=2), sink=str(path))
    with ir.open_slide(str(path)) as slide:
        assert slide.total_tiles == 4096
        result = ir.bench_random_access(slide, batch_size=1000, batches=3, seed=0)
    decoded = result.paths["decoded"]
    compressed = result.paths["compressed"]
    print("\n  " + ir.format_report(result).replace("\n", "\n  "))
    assert decoded.median_rate >= 5_000, \
        f"decoded median {decoded.median_rate:.0f} tiles/s below the 5,000 floor"
    assert compressed.median_rate >= 20_000, \
        f"compressed median {compressed.median_rate:.0f} tiles/s below the 20,000 floor"
    assert time.perf_counter() - start < 60.0
