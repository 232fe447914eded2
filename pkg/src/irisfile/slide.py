"""High-level read access to slide containers.

A SlideHandle is only ever constructed from a file that passed FULL
validation with zero errors, so every downstream read can trust block
bounds. The handle eagerly loads a lightweight metadata summary
(attribute keys, associated-image labels, annotation identifiers, group
names) while tile and image payloads stay on disk and are fetched on
demand; handles are immutable and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import wire
from .codecs import CodecRegistry, PixelBuffer, default_registry
from .errors import DecodeError, OpenError
from .reader import (ArrayView, BlobView, ClinicalMetadataView, FileHeaderView,
                     FileView, SPARSE, TileTableView, open_view, tile_record)
from .validation import ValidationLevel, validate
from .wire import (AnnotationEntry, AssociatedImageEntry, BlockType, EncodingFormat,
                   ImageLabel, KeyFormat, PixelFormat, PyramidLayout)


@dataclass(frozen=True)
class Attribute:
    """One decoded key-value pair.

    DICOM keys render as "GGGG,EEEE"; values decode as UTF-8. A value
    that fails to decode keeps ``value`` None with the problem noted,
    and the raw bytes stay accessible either way.
    """

    key_format: int
    key: str
    value: str | None
    raw_key: bytes
    raw_value: bytes
    note: str | None = None


@dataclass(frozen=True)
class AnnotationGroup:
    name: str
    members: tuple[int, ...]


@dataclass(frozen=True)
class SlideSpaceRect:
    """Rectangle in fractional layer-0 tiles (binary32 semantics)."""

    x: float
    y: float
    width: float
    height: float


def to_view_pixels(rect: SlideSpaceRect, tile_dimension: int, zoom: float):
    """Map a slide-space rect to view pixels: multiply each coordinate
    by tile_dimension * zoom, computed in binary32 like the stored
    coordinates."""
    if zoom <= 0:
        raise ValueError(f"zoom must be positive, got {zoom}")
    scale = np.float32(tile_dimension) * np.float32(zoom)
    return SlideSpaceRect(
        float(np.float32(rect.x) * scale),
        float(np.float32(rect.y) * scale),
        float(np.float32(rect.width) * scale),
        float(np.float32(rect.height) * scale),
    )


def _decode_key(entry: wire.AttributeEntry, raw_key: bytes) -> str:
    if entry.key_format == KeyFormat.DICOM_TAG:
        group = int.from_bytes(raw_key[0:2], "little")
        element = int.from_bytes(raw_key[2:4], "little")
        return f"{group:04X},{element:04X}"
    return raw_key.decode("ascii", errors="replace")


class SlideHandle:
    """Validated, read-only view of an open slide container."""

    def __init__(self, view: FileView, registry: CodecRegistry):
        report = validate(view, ValidationLevel.FULL)
        if not report.ok:
            first = report.errors[0]
            view.close()
            raise OpenError(f"{view.origin}: validation failed with "
                            f"{len(report.errors)} error(s); first: {first.code} "
                            f"at offset {first.offset}: {first.message}", report)
        self.view = view
        self.registry = registry
        self.validation = report

        header = FileHeaderView(view, 0)
        self._table = TileTableView(view, header.tile_table_offset)
        extents = ArrayView(view, self._table.extents_offset, BlockType.LAYER_EXTENTS)
        self.layout = PyramidLayout(tuple(extents))
        self._offsets = ArrayView(view, self._table.offsets_offset, BlockType.TILE_OFFSETS)
        self._meta = ClinicalMetadataView(view, header.metadata_offset)
        self._attributes = self._meta_array(self._meta.attributes_offset,
                                            BlockType.ATTRIBUTES)
        self._associated = self._meta_array(self._meta.associated_images_offset,
                                            BlockType.ASSOCIATED_IMAGES)
        self._annotations = self._meta_array(self._meta.annotations_offset,
                                             BlockType.ANNOTATIONS)
        self._groups = self._meta_array(self._meta.annotation_groups_offset,
                                        BlockType.ANNOTATION_GROUPS)

        # Eager summary; payload bytes stay on disk.
        self.attribute_keys = tuple(a.key for a in self.read_attributes())
        self.associated_image_labels = tuple(
            ImageLabel(e.label).name for e in (self._associated or ()))
        self.annotation_ids = tuple(e.identifier for e in (self._annotations or ()))
        self.group_names = tuple(g.name for g in self.read_annotation_groups())

    def _meta_array(self, offset: int, block_type: BlockType) -> ArrayView | None:
        if offset == 0:
            return None
        return ArrayView(self.view, offset, block_type)

    # -- container facts ---------------------------------------------------

    @property
    def encoding_format(self) -> int:
        return self._table.encoding_format

    @property
    def pixel_format(self) -> PixelFormat:
        return PixelFormat(self._table.pixel_format)

    @property
    def tile_dimension(self) -> int:
        return self._table.tile_dimension

    @property
    def total_tiles(self) -> int:
        return self.layout.total_tiles

    @property
    def sparse_count(self) -> int:
        return sum(1 for e in self._offsets if e.is_sparse)

    def tile_entry(self, index: int):
        """TILE_OFFSETS record for a global index, or SPARSE."""
        return tile_record(self._offsets, index)

    # -- tile reads ---------------------------------------------------------

    def read_tile_compressed(self, index: int):
        """Verbatim payload bytes of one tile (zero-copy memoryview), or
        SPARSE."""
        record = tile_record(self._offsets, index)
        if record is SPARSE:
            return SPARSE
        return self.view.slice(record.tile_offset, record.tile_size)

    def read_tile(self, index: int):
        """Decode one tile to a PixelBuffer, or SPARSE."""
        data = self.read_tile_compressed(index)
        if data is SPARSE:
            return SPARSE
        codec = self.registry.get(self.encoding_format)
        try:
            return codec.decode(data, self.pixel_format,
                                self.tile_dimension, self.tile_dimension)
        except DecodeError as exc:
            raise DecodeError(f"tile {index}: {exc}") from exc

    # -- metadata reads -----------------------------------------------------

    def read_attributes(self) -> list[Attribute]:
        result = []
        if self._attributes is None:
            return result
        for entry in self._attributes:
            raw_key = bytes(self.view.slice(entry.blob_offset, entry.key_size))
            raw_value = bytes(self.view.slice(entry.blob_offset + entry.key_size,
                                              entry.value_size))
            note = None
            if entry.key_format == KeyFormat.DICOM_TAG and entry.key_size != 4:
                note = f"DICOM key must be 4 bytes, found {entry.key_size}"
            try:
                value = raw_value.decode("utf-8")
            except UnicodeDecodeError as exc:
                value, note = None, f"value is not valid UTF-8: {exc}"
            result.append(Attribute(entry.key_format, _decode_key(entry, raw_key),
                                    value, raw_key, raw_value, note))
        return result

    def _associated_entry(self, label) -> AssociatedImageEntry:
        wanted = ImageLabel[label].value if isinstance(label, str) else int(label)
        for entry in self._associated or ():
            if entry.label == wanted:
                return entry
        raise KeyError(f"no associated image labeled {label!r}")

    def read_associated_image(self, label) -> tuple[PixelBuffer, AssociatedImageEntry]:
        """Decode the associated image with the given label (name, enum,
        or raw value); raises KeyError when absent."""
        entry = self._associated_entry(label)
        payload = self.view.slice(entry.payload_offset, entry.payload_size)
        codec = self.registry.get(entry.encoding_format)
        buffer = codec.decode(payload, PixelFormat(entry.pixel_format),
                              entry.width, entry.height)
        return buffer, entry

    def read_icc_profile(self) -> bytes | None:
        if self._meta.icc_offset == 0:
            return None
        blob = BlobView(self.view, self._meta.icc_offset)
        return bytes(blob.payload())

    def read_annotations(self) -> list[AnnotationEntry]:
        return list(self._annotations or ())

    def read_annotation(self, identifier: int) -> AnnotationEntry:
        for entry in self._annotations or ():
            if entry.identifier == identifier:
                return entry
        raise KeyError(f"no annotation with identifier {identifier}")

    def read_annotation_payload(self, identifier: int) -> bytes:
        entry = self.read_annotation(identifier)
        return bytes(self.view.slice(entry.payload_offset, entry.payload_size))

    def read_annotation_groups(self) -> list[AnnotationGroup]:
        result = []
        for entry in self._groups or ():
            name = bytes(self.view.slice(entry.name_offset, entry.name_size)).decode("utf-8")
            members = tuple(
                wire.get_scalar(self.view.data, entry.members_offset + 4 * i, 4)
                for i in range(entry.member_count))
            result.append(AnnotationGroup(name, members))
        return result

    # -- lifecycle ----------------------------------------------------------

    def close(self) -> None:
        self.view.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __repr__(self):
        fmt = EncodingFormat(self.encoding_format).name \
            if self.encoding_format in EncodingFormat._value2member_map_ \
            else hex(self.encoding_format)
        return (f"<SlideHandle {self.view.origin!r}: {self.layout.layer_count} layers, "
                f"{self.total_tiles} tiles, {fmt}/{self.pixel_format.name}>")


def open_slide(source, registry: CodecRegistry | None = None) -> SlideHandle:
    """Open and fully validate a slide from a path or in-memory bytes.

    Any validation ERROR rejects the file; the raised OpenError carries
    the complete ValidationReport.
    """
    if isinstance(source, FileView):
        raise TypeError("open_slide owns its view; pass a path or bytes")
    view = open_view(source)
    try:
        return SlideHandle(view, registry if registry is not None else default_registry())
    except BaseException:
        view.close()  # idempotent; the handle may have closed it already
        raise
