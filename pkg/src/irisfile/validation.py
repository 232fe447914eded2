"""Deep validation of the block offset-chain.

validate() walks every block reachable from the file header and checks
it in place: the leading u64 of a block must decode to the block's own
offset, the recovery tag must carry the magic and the expected type,
version and size fields must be sane, and every byte range implied by a
header must fall inside the file. Problems are collected as findings,
never raised, so tooling sees the complete picture in one pass.

STRUCTURE level stops there and is O(blocks): it never touches entry
contents or tile payload bytes, so validating a multi-gigabyte slide
costs the same as validating its metadata. FULL adds the cross-checks
that need entry contents: tile counts against the pyramid layout, layer
scale monotonicity, reference existence (annotation parents, group
members), blob ranges, and slide-space bounds warnings. Tile payload
bytes are never read at either level.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from enum import Enum

from . import wire
from .reader import (ArrayView, ClinicalMetadataView, FileView, TileTableView,
                     open_view, prefix_problems)
from .wire import BlockType


class ValidationLevel(Enum):
    STRUCTURE = "structure"
    FULL = "full"


class Severity(Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Finding:
    severity: Severity
    block_type: BlockType | None
    offset: int
    code: str
    message: str

    def to_dict(self) -> dict:
        return {
            "severity": self.severity.value,
            "block_type": self.block_type.name if self.block_type else None,
            "offset": self.offset,
            "code": self.code,
            "message": self.message,
        }


@dataclass
class ValidationReport:
    level: ValidationLevel
    findings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(f.severity is Severity.ERROR for f in self.findings)

    @property
    def errors(self) -> list[Finding]:
        return [f for f in self.findings if f.severity is Severity.ERROR]

    @property
    def warnings(self) -> list[Finding]:
        return [f for f in self.findings if f.severity is Severity.WARNING]

    def codes(self) -> set[str]:
        return {f.code for f in self.findings}

    def to_dict(self) -> dict:
        return {
            "level": self.level.value,
            "ok": self.ok,
            "findings": [f.to_dict() for f in self.findings],
        }

    def summary(self) -> str:
        if not self.findings:
            return "clean"
        return f"{len(self.errors)} error(s), {len(self.warnings)} warning(s)"


class _Walk:
    """One validation pass; collects findings and block regions."""

    def __init__(self, view: FileView, level: ValidationLevel):
        self.view = view
        self.level = level
        self.full = level is ValidationLevel.FULL
        self.findings: list[Finding] = []
        self.regions: list[tuple[int, int]] = []  # spans covered by blocks
        self.exact = True  # set from the header's declared spec version

    def error(self, block_type, offset, code, message):
        self.findings.append(Finding(Severity.ERROR, block_type, offset, code, message))

    def warning(self, block_type, offset, code, message):
        self.findings.append(Finding(Severity.WARNING, block_type, offset, code, message))

    def check_prefix(self, offset: int, expected: BlockType) -> bool:
        """Prefix checks for one block; False means do not descend."""
        problems = prefix_problems(self.view, offset, expected, exact_v10=self.exact)
        if not self.exact and not problems:
            prefix = wire.BlockPrefix.unpack_from(self.view.data, offset)
            if prefix.fixed_size < wire.FIXED_SIZES[expected]:
                problems = [("BAD_FIXED_SIZE",
                             f"block at {offset} stores fixed size {prefix.fixed_size}, "
                             f"below the {wire.FIXED_SIZES[expected]} this edition "
                             f"defines for {expected.name}")]
        for code, message in problems:
            self.error(expected, offset, code, message)
        return not problems

    def check_offset_field(self, owner: BlockType, owner_offset: int, value: int,
                           what: str, required: bool = False) -> bool:
        """Validate a chain offset field; False means do not follow it."""
        if value == 0:
            if required:
                self.error(owner, owner_offset, "BAD_OFFSET",
                           f"{what} offset is 0 but the block is required")
            return False
        if not wire.FILE_HEADER_SIZE <= value < len(self.view):
            self.error(owner, owner_offset, "BAD_OFFSET",
                       f"{what} offset {value} outside [{wire.FILE_HEADER_SIZE}, "
                       f"{len(self.view)})")
            return False
        return True

    def check_range(self, owner: BlockType, offset: int, start: int, size: int,
                    code: str, what: str, severity: Severity = Severity.ERROR) -> bool:
        if start < 0 or size < 0 or start + size > len(self.view):
            finding = Finding(severity, owner, offset, code,
                              f"{what} range [{start}, {start + size}) outside file "
                              f"of {len(self.view)} bytes")
            self.findings.append(finding)
            return False
        return True

    # -- block walkers ----------------------------------------------------

    def run(self):
        # Field reads are safe before any checks: open_view guarantees 46
        # bytes, and a 1.x header always stores these fields in the same
        # place. The declared version decides how strictly prefixes are
        # checked, so it is read first.
        header = _HeaderFields(self.view)
        magic_ok = header.magic == wire.FILE_MAGIC
        if magic_ok and header.spec_major == wire.SPEC_MAJOR:
            self.exact = header.spec_minor == wire.SPEC_MINOR

        prefix_ok = self.check_prefix(0, BlockType.FILE_HEADER)
        self.regions.append((0, wire.FILE_HEADER_SIZE))
        if not magic_ok:
            self.error(BlockType.FILE_HEADER, 0, "BAD_MAGIC",
                       f"magic {header.magic:#010x} is not {wire.FILE_MAGIC:#010x}")
            return
        if header.spec_major != wire.SPEC_MAJOR:
            self.error(BlockType.FILE_HEADER, 0, "UNSUPPORTED_VERSION",
                       f"file declares spec {header.spec_major}.{header.spec_minor}; "
                       f"this reader understands major {wire.SPEC_MAJOR}")
            return
        if header.file_size != len(self.view):
            self.error(BlockType.FILE_HEADER, 0, "FILE_SIZE_MISMATCH",
                       f"header says {header.file_size} bytes, stream has {len(self.view)}")
        if not prefix_ok:
            return

        layout = None
        if self.check_offset_field(BlockType.FILE_HEADER, 0,
                                   header.tile_table_offset, "tile-table", required=True):
            layout = self.tile_table(header.tile_table_offset)
        if self.check_offset_field(BlockType.FILE_HEADER, 0,
                                   header.metadata_offset, "clinical-metadata", required=True):
            self.metadata(header.metadata_offset, layout)

    def array(self, offset: int, block_type: BlockType) -> ArrayView | None:
        if not self.check_prefix(offset, block_type):
            return None
        array = ArrayView(self.view, offset, block_type)
        ok = True
        if array.entry_size < wire.MIN_ENTRY_SIZES[block_type]:
            self.error(block_type, offset, "ENTRY_TOO_SMALL",
                       f"stored entry size {array.entry_size} below the known minimum "
                       f"{wire.MIN_ENTRY_SIZES[block_type]} for {block_type.name}")
            ok = False
        if not self.check_range(block_type, offset, array.entries_start,
                                array.entry_size * array.count,
                                "OUT_OF_BOUNDS", f"{block_type.name} entries"):
            ok = False
        if not ok:
            return None
        self.regions.append((offset, array.entries_end - offset))
        if block_type in wire.POOLED_ARRAY_TYPES and array.pool_offset:
            if self.check_offset_field(block_type, offset, array.pool_offset,
                                       f"{block_type.name} payload pool"):
                self.blob(array.pool_offset, BlockType.BYTE_ARRAY)
        return array

    def blob(self, offset: int, block_type: BlockType) -> None:
        if not self.check_prefix(offset, block_type):
            return
        prefix = wire.BlockPrefix.unpack_from(self.view.data, offset)
        payload_size = wire.get_scalar(self.view.data, offset + 14, 8) \
            if prefix.fixed_size >= 22 else 0
        if self.check_range(block_type, offset, offset + prefix.fixed_size,
                            payload_size, "OUT_OF_BOUNDS", f"{block_type.name} payload"):
            self.regions.append((offset, prefix.fixed_size + payload_size))

    def tile_table(self, offset: int) -> wire.PyramidLayout | None:
        if not self.check_prefix(offset, BlockType.TILE_TABLE):
            return None
        table = TileTableView(self.view, offset)
        self.regions.append((offset, table.prefix.fixed_size))
        if table.tile_dimension != wire.TILE_DIMENSION:
            self.error(BlockType.TILE_TABLE, offset, "BAD_TILE_DIMENSION",
                       f"tile dimension {table.tile_dimension}, expected {wire.TILE_DIMENSION}")
        if table.layer_count < 1:
            self.error(BlockType.TILE_TABLE, offset, "BAD_LAYER_COUNT",
                       "layer count is 0")
        if table.encoding_format not in wire.EncodingFormat._value2member_map_:
            self.warning(BlockType.TILE_TABLE, offset, "UNKNOWN_ENCODING_FORMAT",
                         f"encoding format {table.encoding_format:#06x} is not known "
                         f"to this edition")
        if table.pixel_format not in wire.PixelFormat._value2member_map_:
            self.warning(BlockType.TILE_TABLE, offset, "UNKNOWN_PIXEL_FORMAT",
                         f"pixel format {table.pixel_format:#06x} is not known "
                         f"to this edition")

        layout = None
        if self.check_offset_field(BlockType.TILE_TABLE, offset, table.extents_offset,
                                   "layer-extents", required=True):
            extents = self.array(table.extents_offset, BlockType.LAYER_EXTENTS)
            if extents is not None:
                layout = self.layer_extents(extents, table.layer_count)
        if self.check_offset_field(BlockType.TILE_TABLE, offset, table.offsets_offset,
                                   "tile-offsets", required=True):
            offsets = self.array(table.offsets_offset, BlockType.TILE_OFFSETS)
            if offsets is not None and self.full:
                self.tile_offsets(offsets, layout)
        return layout

    def layer_extents(self, extents: ArrayView, declared_count: int) -> wire.PyramidLayout | None:
        if not self.full:
            return None
        block = BlockType.LAYER_EXTENTS
        if extents.count != declared_count:
            self.error(block, extents.offset, "LAYER_COUNT_MISMATCH",
                       f"tile-table declares {declared_count} layers, extents array "
                       f"holds {extents.count}")
        if extents.count == 0:
            return None
        layers = list(extents)
        usable = True
        for i, ext in enumerate(layers):
            if ext.x_tiles < 1 or ext.y_tiles < 1:
                self.error(block, extents.offset, "BAD_LAYER_EXTENT",
                           f"layer {i} extent {ext.x_tiles}x{ext.y_tiles} has an "
                           f"empty dimension")
                usable = False
        if layers[0].scale != 1.0:
            self.error(block, extents.offset, "BAD_LAYER_SCALE",
                       f"layer 0 scale {layers[0].scale!r}, expected 1.0")
        for i in range(1, len(layers)):
            if not layers[i].scale > layers[i - 1].scale:
                self.error(block, extents.offset, "BAD_LAYER_SCALE",
                           f"layer {i} scale {layers[i].scale!r} does not exceed "
                           f"layer {i - 1} scale {layers[i - 1].scale!r}")
        if not usable:
            return None
        return wire.PyramidLayout(tuple(layers))

    def tile_offsets(self, offsets: ArrayView, layout: wire.PyramidLayout | None) -> None:
        block = BlockType.TILE_OFFSETS
        if layout is not None and offsets.count != layout.total_tiles:
            self.error(block, offsets.offset, "TILE_COUNT_MISMATCH",
                       f"tile-offsets array holds {offsets.count} entries, layout "
                       f"defines {layout.total_tiles} tiles")
        spans = sorted(self.regions)
        for i, entry in enumerate(offsets):
            if entry.is_sparse:
                continue
            if entry.tile_offset == wire.SPARSE_OFFSET or entry.tile_size == 0:
                self.error(block, offsets.offset, "BAD_TILE_ENTRY",
                           f"tile {i} entry ({entry.tile_offset:#x}, {entry.tile_size}) "
                           f"is a half-formed sparse sentinel")
                continue
            if entry.tile_offset < wire.FILE_HEADER_SIZE or \
                    entry.tile_offset + entry.tile_size > len(self.view):
                self.error(block, offsets.offset, "TILE_RANGE_OUT_OF_BOUNDS",
                           f"tile {i} range [{entry.tile_offset}, "
                           f"{entry.tile_offset + entry.tile_size}) outside "
                           f"[{wire.FILE_HEADER_SIZE}, {len(self.view)})")
                continue
            if _overlaps(spans, entry.tile_offset, entry.tile_offset + entry.tile_size):
                self.warning(block, offsets.offset, "TILE_OVERLAPS_BLOCK",
                             f"tile {i} range [{entry.tile_offset}, "
                             f"{entry.tile_offset + entry.tile_size}) overlaps a "
                             f"structure block")

    def metadata(self, offset: int, layout: wire.PyramidLayout | None) -> None:
        if not self.check_prefix(offset, BlockType.CLINICAL_METADATA):
            return
        meta = ClinicalMetadataView(self.view, offset)
        self.regions.append((offset, meta.prefix.fixed_size))
        block = BlockType.CLINICAL_METADATA

        annotation_ids: set[int] | None = None
        attributes = associated = annotations = groups = None
        if self.check_offset_field(block, offset, meta.attributes_offset, "attributes"):
            attributes = self.array(meta.attributes_offset, BlockType.ATTRIBUTES)
        if self.check_offset_field(block, offset, meta.associated_images_offset,
                                   "associated-images"):
            associated = self.array(meta.associated_images_offset,
                                    BlockType.ASSOCIATED_IMAGES)
        if self.check_offset_field(block, offset, meta.icc_offset, "ICC profile"):
            self.blob(meta.icc_offset, BlockType.ICC_PROFILE)
        if self.check_offset_field(block, offset, meta.annotations_offset, "annotations"):
            annotations = self.array(meta.annotations_offset, BlockType.ANNOTATIONS)
        if self.check_offset_field(block, offset, meta.annotation_groups_offset,
                                   "annotation-groups"):
            groups = self.array(meta.annotation_groups_offset, BlockType.ANNOTATION_GROUPS)

        if not self.full:
            return
        if attributes is not None:
            self.attribute_entries(attributes)
        if associated is not None:
            self.associated_entries(associated)
        if annotations is not None:
            annotation_ids = self.annotation_entries(annotations, layout)
        if groups is not None:
            self.group_entries(groups, annotation_ids or set())

    def attribute_entries(self, array: ArrayView) -> None:
        block = BlockType.ATTRIBUTES
        for i, entry in enumerate(array):
            if entry.key_size < 1:
                self.error(block, array.offset, "BAD_KEY_SIZE",
                           f"attribute {i} has an empty key")
                continue
            if entry.key_format == wire.KeyFormat.DICOM_TAG and entry.key_size != 4:
                self.error(block, array.offset, "BAD_KEY_SIZE",
                           f"attribute {i} is a DICOM tag with key size "
                           f"{entry.key_size}, expected 4")
            if entry.key_format not in wire.KeyFormat._value2member_map_:
                self.warning(block, array.offset, "UNKNOWN_KEY_FORMAT",
                             f"attribute {i} key format {entry.key_format} is not known")
            if self.check_range(block, array.offset, entry.blob_offset,
                                entry.key_size + entry.value_size,
                                "BLOB_OUT_OF_BOUNDS", f"attribute {i} blob"):
                value = self.view.slice(entry.blob_offset + entry.key_size,
                                        entry.value_size)
                try:
                    bytes(value).decode("utf-8")
                except UnicodeDecodeError:
                    self.warning(block, array.offset, "INVALID_UTF8",
                                 f"attribute {i} value is not valid UTF-8")

    def associated_entries(self, array: ArrayView) -> None:
        block = BlockType.ASSOCIATED_IMAGES
        for i, entry in enumerate(array):
            if entry.label not in wire.ImageLabel._value2member_map_:
                self.error(block, array.offset, "BAD_LABEL",
                           f"associated image {i} label {entry.label} is not known")
            if entry.width < 1 or entry.height < 1:
                self.error(block, array.offset, "BAD_IMAGE_DIMENSIONS",
                           f"associated image {i} is {entry.width}x{entry.height}")
            self.check_range(block, array.offset, entry.payload_offset,
                             entry.payload_size, "BLOB_OUT_OF_BOUNDS",
                             f"associated image {i} payload")

    def annotation_entries(self, array: ArrayView,
                           layout: wire.PyramidLayout | None) -> set[int]:
        block = BlockType.ANNOTATIONS
        seen: set[int] = set()
        entries = list(array)
        for i, entry in enumerate(entries):
            if entry.identifier == 0:
                self.error(block, array.offset, "BAD_ANNOTATION_ID",
                           f"annotation {i} has identifier 0")
            elif entry.identifier in seen:
                self.error(block, array.offset, "DUPLICATE_ANNOTATION_ID",
                           f"annotation identifier {entry.identifier} appears twice")
            seen.add(entry.identifier)
            if entry.raster_width < 1 or entry.raster_height < 1:
                self.error(block, array.offset, "BAD_RASTER_SIZE",
                           f"annotation {entry.identifier} raster is "
                           f"{entry.raster_width}x{entry.raster_height}")
            if entry.annotation_type not in wire.AnnotationType._value2member_map_:
                self.warning(block, array.offset, "UNKNOWN_ANNOTATION_TYPE",
                             f"annotation {entry.identifier} type "
                             f"{entry.annotation_type} is not known")
            self.check_range(block, array.offset, entry.payload_offset,
                             entry.payload_size, "BLOB_OUT_OF_BOUNDS",
                             f"annotation {entry.identifier} payload")
            if layout is not None:
                sx, sy = layout.slide_space_size
                if not (0.0 <= entry.x and entry.x + entry.width <= sx
                        and 0.0 <= entry.y and entry.y + entry.height <= sy):
                    self.warning(block, array.offset, "ANNOTATION_OUTSIDE_SLIDE",
                                 f"annotation {entry.identifier} rect "
                                 f"({entry.x}, {entry.y}, {entry.width}, {entry.height}) "
                                 f"leaves slide space [0, {sx}] x [0, {sy}]")
        for entry in entries:
            if entry.parent_id and entry.parent_id not in seen:
                self.error(block, array.offset, "UNKNOWN_PARENT",
                           f"annotation {entry.identifier} links to missing parent "
                           f"{entry.parent_id}")
        return seen

    def group_entries(self, array: ArrayView, annotation_ids: set[int]) -> None:
        block = BlockType.ANNOTATION_GROUPS
        for i, entry in enumerate(array):
            if entry.name_size < 1:
                self.error(block, array.offset, "EMPTY_GROUP_NAME",
                           f"group {i} has an empty name")
            self.check_range(block, array.offset, entry.name_offset, entry.name_size,
                             "BLOB_OUT_OF_BOUNDS", f"group {i} name")
            if not self.check_range(block, array.offset, entry.members_offset,
                                    entry.member_count * 4, "BLOB_OUT_OF_BOUNDS",
                                    f"group {i} member list"):
                continue
            for m in range(entry.member_count):
                member = wire.get_scalar(self.view.data, entry.members_offset + m * 4, 4)
                if member not in annotation_ids:
                    self.error(block, array.offset, "UNKNOWN_GROUP_MEMBER",
                               f"group {i} references missing annotation {member}")


class _HeaderFields:
    """Raw header field reads used before the header is trusted."""

    def __init__(self, view: FileView):
        data = view.data
        self.magic = wire.get_scalar(data, 14, 4)
        self.spec_major = wire.get_scalar(data, 18, 2)
        self.spec_minor = wire.get_scalar(data, 20, 2)
        self.file_size = wire.get_scalar(data, 22, 8)
        self.tile_table_offset = wire.get_scalar(data, 30, 8)
        self.metadata_offset = wire.get_scalar(data, 38, 8)


def _overlaps(spans: list[tuple[int, int]], start: int, end: int) -> bool:
    i = bisect.bisect_right(spans, (start, float("inf")))
    if i > 0 and spans[i - 1][0] + spans[i - 1][1] > start:
        return True
    return i < len(spans) and spans[i][0] < end


def validate(source, level: ValidationLevel = ValidationLevel.FULL) -> ValidationReport:
    """Validate a container; returns a report, never raises for content.

    ``source`` is a FileView, a path, or in-memory bytes. The report is
    deterministic for identical input bytes, ordered by byte offset
    then finding code.
    """
    owned = not isinstance(source, FileView)
    view = open_view(source) if owned else source
    try:
        walk = _Walk(view, level)
        walk.run()
    finally:
        if owned:
            view.close()
    findings = sorted(walk.findings, key=lambda f: (f.offset, f.code, f.message))
    return ValidationReport(level, findings)
