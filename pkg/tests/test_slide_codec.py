"""Slide handle reads, codecs, annotation geometry, parallel encoding."""

import concurrent.futures
import struct

import numpy as np
import pytest

import irisfile as ir
from irisfile.codecs import CodecRegistry
from irisfile.errors import (CodecUnavailableError, DecodeError, EncodeError,
                             OpenError)

from conftest import basic_source, rich_source

PIL = pytest.importorskip("PIL", reason="JPEG/AVIF plug-ins need Pillow")


def test_open_slide_summary_matches_source(rich_path):
    with ir.open_slide(rich_path) as slide:
        assert slide.layout.layer_count == 2
        assert slide.total_tiles == 20
        assert slide.sparse_count == 1
        assert slide.attribute_keys == ("scanner", "stain", "0010,0010")
        assert slide.associated_image_labels == ("THUMBNAIL", "LABEL")
        assert slide.annotation_ids == (1, 2)
        assert slide.group_names == ("tumor",)


def test_open_slide_rejects_corruption_with_report(basic_bytes):
    data = bytearray(basic_bytes)
    data[46] ^= 0xFF  # tile-table validation tag
    with pytest.raises(OpenError) as excinfo:
        ir.open_slide(bytes(data))
    report = excinfo.value.report
    assert report is not None
    assert "BAD_VALIDATION_TAG" in {f.code for f in report.errors}
    assert "BAD_VALIDATION_TAG" in str(excinfo.value)


def test_slide_without_metadata_has_empty_collections(basic_path):
    with ir.open_slide(basic_path) as slide:
        assert slide.attribute_keys == ()
        assert slide.associated_image_labels == ()
        assert slide.annotation_ids == ()
        assert slide.group_names == ()
        assert slide.read_attributes() == []
        assert slide.read_annotations() == []
        assert slide.read_annotation_groups() == []
        assert slide.read_icc_profile() is None


def test_read_tile_compressed_matches_source(basic_path):
    source = basic_source()
    with ir.open_slide(basic_path) as slide:
        for index in (0, 4, 20):
            layer, x, y = slide.layout.locate(index)
            expected = source.tile(layer, x, y).data
            assert bytes(slide.read_tile_compressed(index)) == expected


def test_sparse_tile_reads(rich_path):
    with ir.open_slide(rich_path) as slide:
        assert slide.read_tile_compressed(5) is ir.SPARSE
        assert slide.read_tile(5) is ir.SPARSE


def test_tile_index_out_of_range(basic_path):
    with ir.open_slide(basic_path) as slide:
        with pytest.raises(IndexError):
            slide.read_tile_compressed(21)


def test_concurrent_reads_equal_serial(basic_path):
    with ir.open_slide(basic_path) as slide:
        rng = np.random.default_rng(3)
        indices = rng.integers(0, slide.total_tiles, 200).tolist()
        serial = [bytes(slide.read_tile_compressed(i)) for i in indices]
        with concurrent.futures.ThreadPoolExecutor(max_workers=8) as pool:
            threaded = list(pool.map(
                lambda i: bytes(slide.read_tile_compressed(i)), indices))
        assert threaded == serial


def test_raw_decode_round_trip(basic_path):
    source = basic_source()
    with ir.open_slide(basic_path) as slide:
        buffer = slide.read_tile(7)
        layer, x, y = slide.layout.locate(7)
        assert buffer == source.tile(layer, x, y)
        assert buffer.to_array().shape == (256, 256, 3)


class GradientSource(ir.SlideSource):
    """Smooth tiles; lossy codecs reconstruct these closely."""

    def __init__(self, layer_specs):
        self.layers = tuple(ir.LayerExtent(x, y, float(2 ** i))
                            for i, (x, y) in enumerate(layer_specs))

    def tile(self, layer, x, y):
        ramp = np.linspace(0, 255, 256, dtype=np.uint8)
        plane = np.minimum(ramp[None, :] // 2 + ramp[:, None] // 2, 255)
        rgb = np.stack([plane, plane[::-1], np.full_like(plane, 64 + 10 * layer)],
                       axis=-1)
        return ir.PixelBuffer.from_array(rgb, ir.PixelFormat.R8G8B8)


def test_jpeg_slide_decodes_to_declared_shape(tmp_path):
    source = GradientSource([(1, 1), (2, 2)])
    path = tmp_path / "jpeg.iris"
    ir.encode_slide(source, ir.EncodeParams(encoding_format=ir.EncodingFormat.JPEG,
                                            quality=90), sink=str(path))
    assert ir.validate(str(path)).ok
    with ir.open_slide(str(path)) as slide:
        buffer = slide.read_tile(0)
        assert (buffer.width, buffer.height) == (256, 256)
        assert buffer.pixel_format == ir.PixelFormat.R8G8B8
        # Lossy but not garbage: mean error against the source stays small.
        original = source.tile(0, 0, 0).to_array().astype(np.int16)
        decoded = buffer.to_array().astype(np.int16)
        assert np.abs(original - decoded).mean() < 8


def test_jpeg_quality_changes_payload_size(tmp_path):
    source = ir.synthetic_source(9, [(1, 1)])
    small = ir.encode_slide(source, ir.EncodeParams(
        encoding_format=ir.EncodingFormat.JPEG, quality=20))
    large = ir.encode_slide(source, ir.EncodeParams(
        encoding_format=ir.EncodingFormat.JPEG, quality=95))
    assert small.file_size < large.file_size


@pytest.mark.skipif(not ir.default_registry().supports(ir.EncodingFormat.AVIF),
                    reason="Pillow lacks AVIF support here")
def test_avif_slide_decodes(tmp_path):
    source = ir.synthetic_source(10, [(1, 1)])
    report = ir.encode_slide(source, ir.EncodeParams(
        encoding_format=ir.EncodingFormat.AVIF, quality=60))
    with ir.open_slide(report.buffer) as slide:
        buffer = slide.read_tile(0)
        assert (buffer.width, buffer.height) == (256, 256)


def test_reserved_codec_is_structurally_legal_but_undecodable():
    payloads = {0: b"opaque-reserved-stream"}
    source = ir.PrecompressedSource([(1, 1)], payloads)
    report = ir.encode_slide(source, ir.EncodeParams(
        encoding_format=ir.EncodingFormat.IRIS_CODEC))
    assert ir.validate(report.buffer).ok
    with ir.open_slide(report.buffer) as slide:
        assert bytes(slide.read_tile_compressed(0)) == payloads[0]
        with pytest.raises(CodecUnavailableError, match="reserved"):
            slide.read_tile(0)


def test_missing_codec_reported_at_encode_time():
    registry = CodecRegistry()  # RAW_TEST only
    source = ir.synthetic_source(1, [(1, 1)])
    with pytest.raises(CodecUnavailableError):
        ir.encode_slide(source, ir.EncodeParams(
            encoding_format=ir.EncodingFormat.JPEG), registry=registry)


def test_malformed_payload_names_the_tile(tmp_path):
    source = ir.synthetic_source(9, [(1, 1)])
    report = ir.encode_slide(source, ir.EncodeParams(
        encoding_format=ir.EncodingFormat.JPEG))
    data = bytearray(report.buffer)
    entry = report.tile_entries[0]
    data[entry.tile_offset:entry.tile_offset + 4] = b"\x00\x00\x00\x00"
    with ir.open_slide(bytes(data)) as slide:
        with pytest.raises(DecodeError, match="tile 0"):
            slide.read_tile(0)


def test_failing_source_aborts_with_coordinates():
    class Exploding(ir.SlideSource):
        layers = (ir.LayerExtent(2, 2, 1.0),)

        def tile(self, layer, x, y):
            if (x, y) == (1, 0):
                raise RuntimeError("synthetic failure")
            return ir.synthetic_source(0, [(2, 2)]).tile(layer, x, y)

    with pytest.raises(EncodeError, match=r"layer 0, x 1, y 0"):
        ir.encode_slide(Exploding())


# -- metadata reads ----------------------------------------------------------

def test_attributes_round_trip(rich_path):
    with ir.open_slide(rich_path) as slide:
        attrs = {a.key: a for a in slide.read_attributes()}
    assert attrs["scanner"].value == "synthetic rig 01"
    assert attrs["scanner"].key_format == ir.KeyFormat.ASCII_KEY
    assert attrs["stain"].value == "H&E"
    dicom = attrs["0010,0010"]
    assert dicom.key_format == ir.KeyFormat.DICOM_TAG
    assert dicom.raw_key == bytes([0x10, 0x00, 0x10, 0x00])
    assert dicom.value == "DOE^JANE"


def test_invalid_utf8_attribute_value_keeps_raw_bytes():
    source = ir.synthetic_source(
        2, [(1, 1)],
        attributes=[ir.AttributeInput("blob", b"\xff\xfe\x00broken")])
    report = ir.encode_slide(source)
    validation = ir.validate(report.buffer)
    assert validation.ok
    assert "INVALID_UTF8" in validation.codes()  # warning, not an error
    with ir.open_slide(report.buffer) as slide:
        attr = slide.read_attributes()[0]
        assert attr.value is None
        assert attr.raw_value == b"\xff\xfe\x00broken"
        assert "UTF-8" in attr.note


def test_associated_image_round_trip(rich_path):
    with ir.open_slide(rich_path) as slide:
        thumb, entry = slide.read_associated_image("THUMBNAIL")
        assert (thumb.width, thumb.height) == (64, 48)
        assert (entry.width, entry.height) == (64, 48)
        assert entry.label == ir.ImageLabel.THUMBNAIL
        expected = rich_source().associated_images()[0].pixels
        assert thumb == expected
        with pytest.raises(KeyError):
            slide.read_associated_image("MACRO")


def test_icc_profile_round_trip(rich_path):
    with ir.open_slide(rich_path) as slide:
        assert slide.read_icc_profile() == b"fake-icc-profile-payload-for-tests"


def test_annotation_round_trip_binary32_exact(rich_path):
    with ir.open_slide(rich_path) as slide:
        note = slide.read_annotation(1)
        assert struct.pack("<f", note.x) == struct.pack("<f", 0.73)
        assert struct.pack("<f", note.width) == struct.pack("<f", 1.0)
        assert (note.raster_width, note.raster_height) == (128, 64)
        assert slide.read_annotation_payload(1) == b"region of interest"
        child = slide.read_annotation(2)
        assert child.parent_id == 1
        assert slide.read_annotation(child.parent_id).identifier == 1
        with pytest.raises(KeyError):
            slide.read_annotation_payload(99)


def test_group_members_resolve(rich_path):
    with ir.open_slide(rich_path) as slide:
        group = slide.read_annotation_groups()[0]
        assert group.name == "tumor"
        ids = set(slide.annotation_ids)
        assert set(group.members) == {1, 2} <= ids


# -- slide-space geometry ----------------------------------------------------

def test_view_pixels_two_by_two_layer(rich_path):
    with ir.open_slide(rich_path) as slide:
        assert slide.layout.slide_space_size == (2.0, 2.0)
    rect = ir.to_view_pixels(ir.SlideSpaceRect(0, 0, 2, 2), 256, 1.0)
    assert (rect.x, rect.y, rect.width, rect.height) == (0.0, 0.0, 512.0, 512.0)


def test_view_pixels_linear_in_zoom():
    rect = ir.SlideSpaceRect(0.5, 1.0, 2.0, 4.0)
    full = ir.to_view_pixels(rect, 256, 1.0)
    half = ir.to_view_pixels(rect, 256, 0.5)
    assert (half.x, half.y, half.width, half.height) == \
        (full.x / 2, full.y / 2, full.width / 2, full.height / 2)


def test_view_pixels_fractional_tile():
    rect = ir.to_view_pixels(ir.SlideSpaceRect(0.73, 0.0, 1.0, 1.0), 256, 1.0)
    ulp = float(np.spacing(np.float32(0.73 * 256)))
    assert abs(rect.x - 0.73 * 256) <= ulp
    assert rect.width == 256.0


def test_view_pixels_rejects_nonpositive_zoom():
    with pytest.raises(ValueError):
        ir.to_view_pixels(ir.SlideSpaceRect(0, 0, 1, 1), 256, 0.0)


def test_out_of_range_annotation_warns_but_opens():
    source = ir.synthetic_source(
        8, [(2, 2)],
        annotations=[ir.AnnotationInput(1, ir.AnnotationType.TEXT_UTF8,
                                        x=1.8, y=0.0, width=1.0, height=0.5,
                                        raster_width=8, raster_height=8,
                                        payload=b"past the edge")])
    report = ir.encode_slide(source)
    validation = ir.validate(report.buffer)
    assert validation.ok  # a bounds excursion is a warning, not an error
    assert "ANNOTATION_OUTSIDE_SLIDE" in validation.codes()
    with ir.open_slide(report.buffer) as slide:
        assert slide.annotation_ids == (1,)


# -- encoding behavior -------------------------------------------------------

def test_worker_counts_yield_identical_decodes(tmp_path):
    source_factory = lambda: ir.synthetic_source(13, [(1, 1), (2, 2), (4, 4)])
    decoded = {}
    for workers in (1, 4, 16):
        report = ir.encode_slide(source_factory(),
                                 ir.EncodeParams(worker_count=workers))
        assert ir.validate(report.buffer).ok
        with ir.open_slide(report.buffer) as slide:
            decoded[workers] = [slide.read_tile(i).data
                                for i in range(slide.total_tiles)]
    assert decoded[1] == decoded[4] == decoded[16]


def test_single_worker_encoding_is_deterministic():
    source = lambda: ir.synthetic_source(4, [(1, 1), (2, 2)])
    first = ir.encode_slide(source(), ir.EncodeParams(worker_count=1)).buffer
    second = ir.encode_slide(source(), ir.EncodeParams(worker_count=1)).buffer
    assert first == second


def test_precompressed_payloads_copied_verbatim():
    rng = np.random.default_rng(20)
    payloads = {i: rng.integers(0, 256, int(rng.integers(10, 500)),
                                dtype=np.uint8).tobytes()
                for i in range(5)}
    source = ir.PrecompressedSource([(1, 1), (2, 2)], payloads)
    report = ir.encode_slide(source, ir.EncodeParams(
        encoding_format=ir.EncodingFormat.JPEG))  # format is a label here
    with ir.open_slide(report.buffer) as slide:
        for i, expected in payloads.items():
            assert bytes(slide.read_tile_compressed(i)) == expected


def test_sparse_source_tiles_become_sparse_entries():
    source = ir.synthetic_source(6, [(2, 2)], sparse=[1, 2])
    report = ir.encode_slide(source)
    assert report.sparse_count == 2
    with ir.open_slide(report.buffer) as slide:
        assert slide.read_tile_compressed(1) is ir.SPARSE
        assert slide.read_tile(0) is not ir.SPARSE


def test_precompressed_missing_tiles_are_sparse():
    source = ir.PrecompressedSource([(1, 1)], {})
    report = ir.encode_slide(source)
    assert report.sparse_count == 1


def test_synthetic_source_determinism():
    a = ir.synthetic_source(42, [(1, 1), (2, 2)])
    b = ir.synthetic_source(42, [(1, 1), (2, 2)])
    c = ir.synthetic_source(43, [(1, 1), (2, 2)])
    assert a.tile(1, 1, 0).data == b.tile(1, 1, 0).data
    assert a.tile(1, 1, 0).data != c.tile(1, 1, 0).data


def test_synthetic_layer_specs_arithmetic():
    source = ir.synthetic_source(1, [(1, 1), (2, 2), (4, 4)])
    assert source.layout().total_tiles == 21
    assert [e.scale for e in source.layers] == [1.0, 2.0, 4.0]


def test_placement_end_also_validates():
    source = ir.synthetic_source(2, [(1, 1), (2, 2)])
    report = ir.encode_slide(source, ir.EncodeParams(placement="end"))
    assert ir.validate(report.buffer).findings == []
    # Structure blocks really are at the tail.
    assert report.tile_table_offset > max(r.offset for r in report.tile_receipts)


def test_rgba_pixel_format_round_trip():
    source = ir.synthetic_source(3, [(1, 1)], pixel_format=ir.PixelFormat.R8G8B8A8)
    report = ir.encode_slide(source)
    with ir.open_slide(report.buffer) as slide:
        buffer = slide.read_tile(0)
        assert buffer.pixel_format == ir.PixelFormat.R8G8B8A8
        assert buffer.to_array().shape == (256, 256, 4)
        assert buffer.data == source.tile(0, 0, 0).data


def test_pyramid_source_box_filter():
    rng = np.random.default_rng(31)
    base = rng.integers(0, 256, (512, 512, 3), dtype=np.uint8)
    source = ir.PyramidSource(base, levels=2)
    assert [(e.x_tiles, e.y_tiles) for e in source.layers] == [(1, 1), (2, 2)]
    assert [e.scale for e in source.layers] == [1.0, 2.0]
    # Level 0 equals the 2x2 rounded box average of the base image.
    wide = base.astype(np.uint16)
    expected = ((wide[0::2, 0::2] + wide[1::2, 0::2]
                 + wide[0::2, 1::2] + wide[1::2, 1::2] + 2) >> 2).astype(np.uint8)
    assert source.tile(0, 0, 0).to_array().tolist() == expected.tolist()
    report = ir.encode_slide(source)
    assert ir.validate(report.buffer).ok


def test_bench_reports_both_paths(basic_path):
    with ir.open_slide(basic_path) as slide:
        result = ir.bench_random_access(slide, batch_size=50, batches=3, seed=1)
    assert set(result.paths) == {"compressed", "decoded"}
    for stats in result.paths.values():
        assert len(stats.rates) == 3
        assert all(r > 0 for r in stats.rates)
        assert stats.median_tpt_ms == pytest.approx(1000 / stats.median_rate)
    report_text = ir.format_report(result)
    assert "[" in report_text and "]" in report_text


def test_bench_skips_sparse_tiles(rich_path):
    with ir.open_slide(rich_path) as slide:
        result = ir.bench_random_access(slide, batch_size=10, batches=1, seed=0)
    assert result.non_sparse_count == 19
