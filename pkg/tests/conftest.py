"""Shared fixtures: canonical slide files used across the suite.

``basic`` is the bare three-layer pyramid every structural test leans
on; ``rich`` adds every optional metadata family plus a sparse tile so
metadata and recovery paths get exercised against one well-known file.
"""

from __future__ import annotations

import struct

import pytest

import irisfile as ir

BASIC_SEED = 7
BASIC_LAYERS = [(1, 1), (2, 2), (4, 4)]  # 21 tiles


def basic_source() -> ir.SyntheticSource:
    return ir.synthetic_source(BASIC_SEED, BASIC_LAYERS)


def rich_source() -> ir.SyntheticSource:
    thumb = ir.synthetic_source(3, [(1, 1)])
    thumb_pixels = ir.PixelBuffer.from_array(
        thumb.tile(0, 0, 0).to_array()[:48, :64], ir.PixelFormat.R8G8B8)
    label_pixels = ir.PixelBuffer.from_array(
        thumb.tile(0, 0, 0).to_array()[:32, :32], ir.PixelFormat.R8G8B8)
    return ir.synthetic_source(
        21, [(2, 2), (4, 4)],
        sparse=[5],
        attributes=[
            ir.AttributeInput("scanner", "synthetic rig 01"),
            ir.AttributeInput("stain", "H&E"),
            ir.AttributeInput((0x0010, 0x0010), "DOE^JANE",
                              key_format=ir.KeyFormat.DICOM_TAG),
        ],
        associated_images=[
            ir.AssociatedImageInput(ir.ImageLabel.THUMBNAIL, thumb_pixels),
            ir.AssociatedImageInput(ir.ImageLabel.LABEL, label_pixels),
        ],
        icc=b"fake-icc-profile-payload-for-tests",
        annotations=[
            ir.AnnotationInput(1, ir.AnnotationType.TEXT_UTF8,
                               x=0.73, y=0.25, width=1.0, height=0.5,
                               raster_width=128, raster_height=64,
                               payload="region of interest".encode()),
            ir.AnnotationInput(2, ir.AnnotationType.SVG,
                               x=0.1, y=0.1, width=0.2, height=0.2,
                               raster_width=64, raster_height=64,
                               payload=b"<svg>stub</svg>", parent_id=1),
        ],
        annotation_groups=[ir.GroupInput("tumor", (1, 2))],
    )


@pytest.fixture(scope="session")
def basic_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("slides") / "basic.iris"
    ir.encode_slide(basic_source(), ir.EncodeParams(worker_count=2), sink=str(path))
    return str(path)


@pytest.fixture(scope="session")
def basic_report(tmp_path_factory):
    path = tmp_path_factory.mktemp("slides") / "basic_report.iris"
    report = ir.encode_slide(basic_source(), ir.EncodeParams(worker_count=1),
                             sink=str(path))
    return report


@pytest.fixture(scope="session")
def basic_bytes(basic_report):
    with open(basic_report.origin, "rb") as f:
        return f.read()


@pytest.fixture(scope="session")
def rich_report(tmp_path_factory):
    path = tmp_path_factory.mktemp("slides") / "rich.iris"
    return ir.encode_slide(rich_source(), ir.EncodeParams(worker_count=2),
                           sink=str(path))


@pytest.fixture(scope="session")
def rich_path(rich_report):
    return rich_report.origin


def patch_u16(data: bytearray, offset: int, value: int) -> None:
    struct.pack_into("<H", data, offset, value)


def patch_u32(data: bytearray, offset: int, value: int) -> None:
    struct.pack_into("<I", data, offset, value)


def patch_u64(data: bytearray, offset: int, value: int) -> None:
    struct.pack_into("<Q", data, offset, value)


def pytest_runtest_logreport(report):
    # One visible verdict line per acceptance criterion.
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        verdict = "PASS" if report.passed else ("FAIL" if report.failed else "SKIP")
        name = report.nodeid.rsplit("::", 1)[-1]
        print(f"\nACCEPTANCE {verdict}: {name}", flush=True)
