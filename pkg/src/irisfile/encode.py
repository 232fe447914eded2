"""Slide encoding: sources, the parallel tile pipeline, and fixtures.

encode_slide() drives any number of worker threads. Workers pull tiles
in any order from any pyramid layer, compress them (or pass
precompressed bytes through untouched), claim a byte range from the
shared reservation counter and write into it independently. Once every
payload has landed, the structure blocks are filled in — the
TILE_OFFSETS array always in global-index order, however scrambled the
payload placement came out — and the file header is patched last.

Two placement policies are supported. "start" reserves all structure
blocks right after the header before any tile is written, which keeps
the file's skeleton in the first few kilobytes (a truncated file then
loses only trailing tiles, not its structure). "end" streams tiles
first and appends structure at EOF, which suits rewriting metadata
without disturbing payloads.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import wire
from .codecs import CodecRegistry, PixelBuffer, default_registry
from .errors import CodecUnavailableError, EncodeError
from .wire import (AnnotationEntry, AnnotationGroupEntry, AssociatedImageEntry,
                   AttributeEntry, BlockType, ClinicalMetadata, EncodingFormat,
                   KeyFormat, LayerExtent, PixelFormat, PyramidLayout, TileOffsetEntry,
                   TileTable)
from .writer import (BufferSink, FileSink, ReservationAllocator, WriteReceipt,
                     array_block_size, finalize, write_array_block, write_blob_block,
                     write_header_block, write_tile_payload)


@dataclass(frozen=True)
class AttributeInput:
    """Key-value pair to embed; key is an ASCII string or, for DICOM,
    a (group, element) pair."""

    key: object
    value: str | bytes
    key_format: KeyFormat = KeyFormat.ASCII_KEY

    def key_bytes(self) -> bytes:
        if self.key_format == KeyFormat.DICOM_TAG:
            group, element = self.key
            return int(group).to_bytes(2, "little") + int(element).to_bytes(2, "little")
        return self.key.encode("ascii") if isinstance(self.key, str) else bytes(self.key)

    def value_bytes(self) -> bytes:
        return self.value.encode("utf-8") if isinstance(self.value, str) else bytes(self.value)


@dataclass(frozen=True)
class AssociatedImageInput:
    label: wire.ImageLabel
    pixels: PixelBuffer
    encoding_format: EncodingFormat | None = None  # None: same as the slide


@dataclass(frozen=True)
class AnnotationInput:
    identifier: int
    annotation_type: wire.AnnotationType
    x: float
    y: float
    width: float
    height: float
    raster_width: int
    raster_height: int
    payload: bytes
    parent_id: int = 0


@dataclass(frozen=True)
class GroupInput:
    name: str
    members: tuple[int, ...]


class SlideSource:
    """Input contract for the encoder.

    ``layers`` lists LayerExtent values, lowest resolution first.
    ``tile`` returns a PixelBuffer to compress, ready-made compressed
    bytes to copy through verbatim, or None for a sparse tile; it must
    tolerate concurrent calls for distinct tiles.
    """

    layers: tuple[LayerExtent, ...]
    pixel_format: PixelFormat = PixelFormat.R8G8B8

    def layout(self) -> PyramidLayout:
        return PyramidLayout(tuple(self.layers))

    def tile(self, layer: int, x: int, y: int):
        raise NotImplementedError

    def attributes(self) -> list[AttributeInput]:
        return []

    def associated_images(self) -> list[AssociatedImageInput]:
        return []

    def icc_profile(self) -> bytes | None:
        return None

    def annotations(self) -> list[AnnotationInput]:
        return []

    def annotation_groups(self) -> list[GroupInput]:
        return []


_YY, _XX = np.mgrid[0:wire.TILE_DIMENSION, 0:wire.TILE_DIMENSION].astype(np.uint64)


def _procedural_tile(seed: int, layer: int, x: int, y: int,
                     pixel_format: PixelFormat) -> PixelBuffer:
    # Integer mixing only, so tiles are bit-identical on every host.
    base = (seed * 0x9E3779B97F4A7C15
            ^ layer * 0xC2B2AE3D27D4EB4F
            ^ x * 0x165667B19E3779F9
            ^ y * 0xD6E8FEB86659FD93) & 0xFFFFFFFFFFFFFFFF
    mixed = (_XX * 0x01000193 + _YY * 0x0002A65D) ^ np.uint64(base)
    mixed = (mixed * np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    channels = pixel_format.bytes_per_pixel
    planes = [((mixed >> np.uint64(8 * c)) & np.uint64(0xFF)).astype(np.uint8)
              for c in range(channels)]
    return PixelBuffer.from_array(np.stack(planes, axis=-1), pixel_format)


class SyntheticSource(SlideSource):
    """Deterministic procedural slide used by tests and benchmarks.

    Every pixel is a pure function of (seed, layer, x, y), so two
    sources with the same seed and layout produce identical slides on
    any host; different seeds differ essentially everywhere.
    """

    def __init__(self, seed: int, layer_specs, pixel_format=PixelFormat.R8G8B8,
                 sparse=(), attributes=(), associated_images=(), icc=None,
                 annotations=(), annotation_groups=()):
        self.seed = int(seed)
        self.layers = tuple(_as_extent(i, spec) for i, spec in enumerate(layer_specs))
        self.pixel_format = PixelFormat(pixel_format)
        self._layout = PyramidLayout(self.layers)
        self._sparse = frozenset(int(i) for i in sparse)
        self._attributes = list(attributes)
        self._associated = list(associated_images)
        self._icc = icc
        self._annotations = list(annotations)
        self._groups = list(annotation_groups)

    def tile(self, layer: int, x: int, y: int):
        if self._layout.global_index(layer, x, y) in self._sparse:
            return None
        return _procedural_tile(self.seed, layer, x, y, self.pixel_format)

    def attributes(self):
        return self._attributes

    def associated_images(self):
        return self._associated

    def icc_profile(self):
        return self._icc

    def annotations(self):
        return self._annotations

    def annotation_groups(self):
        return self._groups


def _as_extent(index: int, spec) -> LayerExtent:
    if isinstance(spec, LayerExtent):
        return spec
    if len(spec) == 2:
        return LayerExtent(int(spec[0]), int(spec[1]), float(2 ** index))
    x, y, scale = spec
    return LayerExtent(int(x), int(y), float(scale))


def synthetic_source(seed: int, layer_specs, **kwargs) -> SyntheticSource:
    """Convenience constructor; ``layer_specs`` is a list of (x_tiles,
    y_tiles) pairs, lowest resolution first, with scales 1, 2, 4, ...
    (or explicit (x, y, scale) triples)."""
    return SyntheticSource(seed, layer_specs, **kwargs)


class PrecompressedSource(SlideSource):
    """Source feeding ready-made compressed streams, copied through
    verbatim by the encoder (no transcode, no quality loss)."""

    def __init__(self, layer_specs, payloads: dict[int, bytes],
                 pixel_format=PixelFormat.R8G8B8):
        self.layers = tuple(_as_extent(i, spec) for i, spec in enumerate(layer_specs))
        self.pixel_format = PixelFormat(pixel_format)
        self._layout = PyramidLayout(self.layers)
        self._payloads = dict(payloads)

    def tile(self, layer: int, x: int, y: int):
        return self._payloads.get(self._layout.global_index(layer, x, y))


class PyramidSource(SlideSource):
    """Builds a pyramid from one full-resolution image by repeated 2x2
    box-filter averaging; edge tiles are zero-padded to 256."""

    def __init__(self, base_image: np.ndarray, pixel_format=PixelFormat.R8G8B8,
                 levels: int = 3):
        self.pixel_format = PixelFormat(pixel_format)
        if base_image.ndim != 3 or base_image.shape[2] != self.pixel_format.bytes_per_pixel:
            raise ValueError(f"base image shape {base_image.shape} does not match "
                             f"{self.pixel_format.name}")
        images = [np.asarray(base_image, dtype=np.uint8)]
        for _ in range(levels - 1):
            images.insert(0, _box_downsample(images[0]))
        self._images = images
        dim = wire.TILE_DIMENSION
        base_w = images[0].shape[1]
        self.layers = tuple(
            LayerExtent(-(-img.shape[1] // dim), -(-img.shape[0] // dim),
                        img.shape[1] / base_w)
            for img in images)

    def tile(self, layer: int, x: int, y: int):
        dim = wire.TILE_DIMENSION
        img = self._images[layer]
        patch = img[y * dim:(y + 1) * dim, x * dim:(x + 1) * dim]
        if patch.shape[:2] != (dim, dim):
            padded = np.zeros((dim, dim, img.shape[2]), dtype=np.uint8)
            padded[:patch.shape[0], :patch.shape[1]] = patch
            patch = padded
        return PixelBuffer.from_array(patch, self.pixel_format)


def _box_downsample(image: np.ndarray) -> np.ndarray:
    h, w = image.shape[:2]
    if h % 2 or w % 2:
        image = np.pad(image, ((0, h % 2), (0, w % 2), (0, 0)), mode="edge")
        h, w = image.shape[:2]
    wide = image.astype(np.uint16)
    acc = wide[0::2, 0::2] + wide[1::2, 0::2] + wide[0::2, 1::2] + wide[1::2, 1::2]
    return ((acc + 2) >> 2).astype(np.uint8)


@dataclass
class EncodeParams:
    encoding_format: EncodingFormat = EncodingFormat.RAW_TEST
    quality: int | None = None
    worker_count: int = 1
    placement: str = "start"  # or "end"


@dataclass
class EncodeReport:
    origin: str
    file_size: int
    layout: PyramidLayout
    tile_entries: list[TileOffsetEntry]
    receipts: list[WriteReceipt]
    tile_table_offset: int
    metadata_offset: int
    worker_count: int
    elapsed_s: float
    buffer: bytes | None = None  # set when encoding to an internal memory sink

    @property
    def sparse_count(self) -> int:
        return sum(1 for e in self.tile_entries if e.is_sparse)

    @property
    def tile_receipts(self) -> list[WriteReceipt]:
        return [r for r in self.receipts if r.block_type is None]


class _MetadataPlan:
    """Metadata blocks have fully computable sizes before any tile is
    written, which is what makes the "start" placement possible: build
    pools and entries first, reserve, then write."""

    def __init__(self, source: SlideSource, params: EncodeParams,
                 registry: CodecRegistry):
        self.families = []  # (block_type, entries_factory, pool_payload)
        self.icc = source.icc_profile()

        attrs = source.attributes()
        pool = bytearray()
        entries = []
        for a in attrs:
            key, value = a.key_bytes(), a.value_bytes()
            entries.append((len(pool), a, key, value))
            pool.extend(key)
            pool.extend(value)

        def attr_entries(pool_base, items=tuple(entries)):
            return [AttributeEntry(int(a.key_format), len(key), len(value),
                                   pool_base + rel)
                    for rel, a, key, value in items]

        self.families.append((BlockType.ATTRIBUTES, attr_entries, bytes(pool)))

        images = source.associated_images()
        pool = bytearray()
        entries = []
        for img in images:
            fmt = img.encoding_format or params.encoding_format
            payload = registry.get(fmt).encode(img.pixels, params.quality)
            entries.append((len(pool), img, fmt, len(payload)))
            pool.extend(payload)

        def image_entries(pool_base, items=tuple(entries)):
            return [AssociatedImageEntry(pool_base + rel, size, int(fmt),
                                         int(img.pixels.pixel_format),
                                         img.pixels.width, img.pixels.height,
                                         int(img.label))
                    for rel, img, fmt, size in items]

        self.families.append((BlockType.ASSOCIATED_IMAGES, image_entries, bytes(pool)))

        notes = source.annotations()
        pool = bytearray()
        entries = []
        for n in notes:
            entries.append((len(pool), n))
            pool.extend(n.payload)

        def annotation_entries(pool_base, items=tuple(entries)):
            return [AnnotationEntry(n.identifier, int(n.annotation_type),
                                    float(n.x), float(n.y),
                                    float(n.width), float(n.height),
                                    n.raster_width, n.raster_height,
                                    pool_base + rel, len(n.payload), n.parent_id)
                    for rel, n in items]

        self.families.append((BlockType.ANNOTATIONS, annotation_entries, bytes(pool)))

        groups = source.annotation_groups()
        pool = bytearray()
        entries = []
        for g in groups:
            name = g.name.encode("utf-8")
            members = b"".join(int(m).to_bytes(4, "little") for m in g.members)
            entries.append((len(pool), len(name), len(pool) + len(name), g))
            pool.extend(name)
            pool.extend(members)

        def group_entries(pool_base, items=tuple(entries)):
            return [AnnotationGroupEntry(pool_base + name_rel, name_size,
                                         len(g.members), pool_base + members_rel)
                    for name_rel, name_size, members_rel, g in items]

        self.families.append((BlockType.ANNOTATION_GROUPS, group_entries, bytes(pool)))

    def reserve_and_write(self, sink, allocator) -> tuple[ClinicalMetadata, list[WriteReceipt]]:
        """Reserve every metadata block, then write them all; returns the
        offsets record for the CLINICAL_METADATA block."""
        receipts = []
        meta_offset_by_type = {}
        blob_fixed = wire.FIXED_SIZES[BlockType.BYTE_ARRAY]
        for block_type, entry_factory, pool in self.families:
            entries_probe = entry_factory(0)
            if not entries_probe:
                continue
            entry_size = wire.MIN_ENTRY_SIZES[block_type]
            array_offset = allocator.reserve(
                array_block_size(block_type, entry_size, len(entries_probe)))
            pool_offset = 0
            if pool:
                pool_offset = allocator.reserve(blob_fixed + len(pool))
                receipts.append(write_blob_block(sink, pool_offset, BlockType.BYTE_ARRAY,
                                                 pool, content_hint=int(block_type)))
            payload_base = pool_offset + blob_fixed if pool_offset else 0
            receipts.append(write_array_block(sink, array_offset, block_type, entry_size,
                                              entry_factory(payload_base),
                                              pool_offset=pool_offset))
            meta_offset_by_type[block_type] = array_offset
        icc_offset = 0
        if self.icc:
            icc_offset = allocator.reserve(wire.FIXED_SIZES[BlockType.ICC_PROFILE]
                                           + len(self.icc))
            receipts.append(write_blob_block(sink, icc_offset, BlockType.ICC_PROFILE,
                                             self.icc, content_hint=int(BlockType.ICC_PROFILE)))
        meta = ClinicalMetadata(
            attributes_offset=meta_offset_by_type.get(BlockType.ATTRIBUTES, 0),
            associated_images_offset=meta_offset_by_type.get(BlockType.ASSOCIATED_IMAGES, 0),
            icc_offset=icc_offset,
            annotations_offset=meta_offset_by_type.get(BlockType.ANNOTATIONS, 0),
            annotation_groups_offset=meta_offset_by_type.get(BlockType.ANNOTATION_GROUPS, 0),
        )
        return meta, receipts


def encode_slide(source: SlideSource, params: EncodeParams | None = None,
                 sink=None, registry: CodecRegistry | None = None) -> EncodeReport:
    """Encode a source into a container; returns the receipts and layout.

    ``sink`` is a path, a FileSink/BufferSink, or None for an anonymous
    in-memory buffer (check ``report.origin`` / pass your own BufferSink
    to retrieve the bytes). The output always passes FULL validation.
    """
    params = params or EncodeParams()
    registry = registry if registry is not None else default_registry()
    if params.placement not in ("start", "end"):
        raise ValueError(f"unknown placement policy {params.placement!r}")

    layout = source.layout()
    anonymous = sink is None
    own_sink = anonymous or isinstance(sink, str) or hasattr(sink, "__fspath__")
    if anonymous:
        sink = BufferSink()
    elif own_sink:
        sink = FileSink(sink)

    started = time.perf_counter()
    try:
        report = _encode(source, params, sink, registry, layout)
        if anonymous:
            report.buffer = sink.getvalue()
    finally:
        if own_sink:
            sink.close()
    report.elapsed_s = time.perf_counter() - started
    return report


def _encode(source, params, sink, registry, layout) -> EncodeReport:
    allocator = ReservationAllocator()
    receipts: list[WriteReceipt] = []
    entry_size = wire.MIN_ENTRY_SIZES[BlockType.TILE_OFFSETS]
    extent_size = wire.MIN_ENTRY_SIZES[BlockType.LAYER_EXTENTS]
    plan = _MetadataPlan(source, params, registry)

    table_offset = extents_offset = offsets_offset = meta = meta_offset = None
    if params.placement == "start":
        table_offset = allocator.reserve(wire.FIXED_SIZES[BlockType.TILE_TABLE])
        extents_offset = allocator.reserve(
            array_block_size(BlockType.LAYER_EXTENTS, extent_size, layout.layer_count))
        offsets_offset = allocator.reserve(
            array_block_size(BlockType.TILE_OFFSETS, entry_size, layout.total_tiles))
        meta_offset = allocator.reserve(wire.FIXED_SIZES[BlockType.CLINICAL_METADATA])
        meta, meta_receipts = plan.reserve_and_write(sink, allocator)
        receipts.extend(meta_receipts)

    entries: list[TileOffsetEntry | None] = [None] * layout.total_tiles
    receipts_lock = threading.Lock()

    # A purely precompressed source needs no codec; defer the failure
    # until a pixel buffer actually shows up.
    try:
        codec = registry.get(params.encoding_format)
    except CodecUnavailableError:
        codec = None

    def encode_one(index: int) -> None:
        layer, x, y = layout.locate(index)
        try:
            produced = source.tile(layer, x, y)
        except Exception as exc:
            raise EncodeError(f"source failed for tile (layer {layer}, x {x}, y {y}): "
                              f"{exc}") from exc
        if produced is None:
            entries[index] = TileOffsetEntry.sparse()
            return
        if isinstance(produced, PixelBuffer):
            if codec is None:
                registry.get(params.encoding_format)  # raises CodecUnavailableError
            try:
                payload = codec.encode(produced, params.quality)
            except Exception as exc:
                raise EncodeError(f"codec failed for tile (layer {layer}, x {x}, "
                                  f"y {y}): {exc}") from exc
        else:
            payload = bytes(produced)  # precompressed: copied through verbatim
        offset = allocator.reserve(len(payload))
        receipt = write_tile_payload(sink, offset, payload)
        with receipts_lock:
            receipts.append(receipt)
        entries[index] = TileOffsetEntry(offset, len(payload))

    if params.worker_count <= 1:
        for index in range(layout.total_tiles):
            encode_one(index)
    else:
        with ThreadPoolExecutor(max_workers=params.worker_count) as pool:
            for future in [pool.submit(encode_one, i) for i in range(layout.total_tiles)]:
                future.result()

    if params.placement == "end":
        table_offset = allocator.reserve(wire.FIXED_SIZES[BlockType.TILE_TABLE])
        extents_offset = allocator.reserve(
            array_block_size(BlockType.LAYER_EXTENTS, extent_size, layout.layer_count))
        offsets_offset = allocator.reserve(
            array_block_size(BlockType.TILE_OFFSETS, entry_size, layout.total_tiles))
        meta_offset = allocator.reserve(wire.FIXED_SIZES[BlockType.CLINICAL_METADATA])
        meta, meta_receipts = plan.reserve_and_write(sink, allocator)
        receipts.extend(meta_receipts)

    receipts.append(write_array_block(sink, extents_offset, BlockType.LAYER_EXTENTS,
                                      extent_size, list(layout.layers)))
    receipts.append(write_array_block(sink, offsets_offset, BlockType.TILE_OFFSETS,
                                      entry_size, entries))
    receipts.append(write_header_block(
        sink, table_offset, BlockType.TILE_TABLE,
        TileTable(extents_offset, offsets_offset, int(params.encoding_format),
                  int(source.pixel_format), layout.layer_count)))
    receipts.append(write_header_block(sink, meta_offset, BlockType.CLINICAL_METADATA, meta))
    file_size = allocator.cursor
    receipts.append(finalize(sink, file_size, table_offset, meta_offset))

    origin = getattr(sink, "path", "<memory>")
    return EncodeReport(origin, file_size, layout, entries, receipts,
                        table_offset, meta_offset, params.worker_count, 0.0)
