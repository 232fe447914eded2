"""Zero-copy typed views over a container byte stream.

A FileView wraps the raw bytes (a read-only mmap for paths, a
memoryview for in-memory data). Block views decode fixed-size fields
straight out of the view on access; nothing is copied until a caller
asks for payload bytes. A field that lies beyond a block's stored
fixed_size (a file written by an older edition) reads as its documented
default instead of failing, and array entries are consumed using the
stride stored in the file, so entries grown by future editions parse
identically.
"""

from __future__ import annotations

import mmap
import os
import sys

from . import wire
from .errors import CapacityError, FormatError, OpenError
from .wire import BlockType


class _Sparse:
    """Singleton marking a tile index with no stored payload."""

    __slots__ = ()

    def __repr__(self):
        return "SPARSE"

    def __bool__(self):
        return False


SPARSE = _Sparse()


class FileView:
    """Immutable random-access view of a container's bytes."""

    def __init__(self, data, origin: str, _closer=None):
        self._raw = data  # underlying bytes-like; kept for its fast find()
        self.data = memoryview(data)
        self.origin = origin
        self._closer = _closer

    def __len__(self) -> int:
        return len(self.data)

    def slice(self, offset: int, size: int) -> memoryview:
        if offset < 0 or size < 0 or offset + size > len(self.data):
            raise IndexError(f"range [{offset}, {offset + size}) outside file "
                             f"of {len(self.data)} bytes")
        return self.data[offset:offset + size]

    def find(self, needle: bytes, start: int = 0) -> int:
        """Byte search delegated to the underlying object (bytes, mmap)."""
        return self._raw.find(needle, start)

    def close(self) -> None:
        self.data.release()
        if self._closer is not None:
            try:
                self._closer()
            except BufferError:
                # Zero-copy slices handed to callers still reference the
                # mapping; the OS unmaps once the last one is released.
                pass
            self._closer = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def open_view(source) -> FileView:
    """Open a path or an in-memory byte region for reading.

    No parsing happens here; the view is just the exact bytes. Files
    shorter than the 46-byte header are rejected, as are files larger
    than the host can address.
    """
    if isinstance(source, (bytes, bytearray, memoryview)):
        if len(source) < wire.FILE_HEADER_SIZE:
            raise OpenError(f"{len(source)}-byte region is shorter than the "
                            f"{wire.FILE_HEADER_SIZE}-byte file header")
        if isinstance(source, memoryview):
            source = bytes(source)  # memoryview lacks find(); one copy at open
        return FileView(source, "<memory>")

    path = os.fspath(source)
    size = os.path.getsize(path)
    if size < wire.FILE_HEADER_SIZE:
        raise OpenError(f"{path}: {size} bytes is shorter than the "
                        f"{wire.FILE_HEADER_SIZE}-byte file header")
    if size > sys.maxsize:
        raise CapacityError(f"{path}: {size} bytes exceeds this host's addressing limit")
    with open(path, "rb") as f:
        # The mapping duplicates the descriptor; the handle can go now.
        mapped = mmap.mmap(f.fileno(), 0, access=mmap.ACCESS_READ)
    return FileView(mapped, path, mapped.close)


def prefix_problems(view: FileView, offset: int, expected_type: BlockType,
                    exact_v10: bool = False) -> list[tuple[str, str]]:
    """Check a block prefix, returning (code, message) pairs, worst first.

    With ``exact_v10`` the block must look exactly as this version
    writes it (version byte 1, the type's exact fixed size); otherwise
    future editions are tolerated: version >= 1 and fixed_size >= 14.
    """
    problems = []
    if offset + wire.PREFIX_SIZE > len(view):
        return [("OUT_OF_BOUNDS",
                 f"block prefix at {offset} runs past end of file ({len(view)} bytes)")]
    prefix = wire.BlockPrefix.unpack_from(view.data, offset)
    if prefix.validation_tag != offset:
        problems.append(("BAD_VALIDATION_TAG",
                         f"validation tag {prefix.validation_tag:#x} at offset {offset} "
                         f"does not encode its own location"))
    type_code = wire.parse_recovery_tag(prefix.recovery_tag)
    if type_code is None:
        problems.append(("BAD_RECOVERY_MAGIC",
                         f"recovery tag {prefix.recovery_tag:#010x} at offset {offset} "
                         f"lacks the {wire.RECOVERY_MAGIC:#06x} magic"))
    elif type_code != expected_type:
        known = BlockType(type_code).name if wire.is_known_block_type(type_code) else "unknown"
        problems.append(("BLOCK_TYPE_MISMATCH",
                         f"block at {offset} has type {type_code:#06x} ({known}), "
                         f"expected {expected_type.name}"))
    if exact_v10:
        if prefix.block_version != 1:
            problems.append(("BAD_BLOCK_VERSION",
                             f"block at {offset} has version {prefix.block_version}, "
                             f"expected 1 in a 1.0 file"))
        if prefix.fixed_size != wire.FIXED_SIZES[expected_type]:
            problems.append(("BAD_FIXED_SIZE",
                             f"block at {offset} stores fixed size {prefix.fixed_size}, "
                             f"expected {wire.FIXED_SIZES[expected_type]} for "
                             f"{expected_type.name} in a 1.0 file"))
    else:
        if prefix.block_version < 1:
            problems.append(("BAD_BLOCK_VERSION",
                             f"block at {offset} has version 0"))
        if prefix.fixed_size < wire.PREFIX_SIZE:
            problems.append(("BAD_FIXED_SIZE",
                             f"block at {offset} stores fixed size {prefix.fixed_size}, "
                             f"below the {wire.PREFIX_SIZE}-byte prefix"))
    if offset + prefix.fixed_size > len(view):
        problems.append(("OUT_OF_BOUNDS",
                         f"fixed region of block at {offset} "
                         f"({prefix.fixed_size} bytes) runs past end of file"))
    return problems


class BlockView:
    """Base for typed views; subclasses decode fields lazily."""

    block_type: BlockType

    def __init__(self, view: FileView, offset: int):
        self.view = view
        self.offset = offset
        self.prefix = wire.BlockPrefix.unpack_from(view.data, offset)

    def _u(self, rel: int, width: int, default: int = 0) -> int:
        # Fields past the stored fixed_size belong to a newer edition of
        # the reader than of the file; they read as their default.
        if rel + width > self.prefix.fixed_size:
            return default
        return wire.get_scalar(self.view.data, self.offset + rel, width)

    @property
    def end(self) -> int:
        return self.offset + self.prefix.fixed_size


class FileHeaderView(BlockView):
    block_type = BlockType.FILE_HEADER

    @property
    def magic(self) -> int:
        return self._u(14, 4)

    @property
    def spec_major(self) -> int:
        return self._u(18, 2)

    @property
    def spec_minor(self) -> int:
        return self._u(20, 2)

    @property
    def file_size(self) -> int:
        return self._u(22, 8)

    @property
    def tile_table_offset(self) -> int:
        return self._u(30, 8)

    @property
    def metadata_offset(self) -> int:
        return self._u(38, 8)


class TileTableView(BlockView):
    block_type = BlockType.TILE_TABLE

    @property
    def extents_offset(self) -> int:
        return self._u(14, 8)

    @property
    def offsets_offset(self) -> int:
        return self._u(22, 8)

    @property
    def encoding_format(self) -> int:
        return self._u(30, 2)

    @property
    def pixel_format(self) -> int:
        return self._u(32, 2)

    @property
    def layer_count(self) -> int:
        return self._u(34, 4)

    @property
    def tile_dimension(self) -> int:
        return self._u(38, 4, default=wire.TILE_DIMENSION)

    def to_record(self) -> wire.TileTable:
        return wire.TileTable(self.extents_offset, self.offsets_offset,
                              self.encoding_format, self.pixel_format,
                              self.layer_count, self.tile_dimension)


class ClinicalMetadataView(BlockView):
    block_type = BlockType.CLINICAL_METADATA

    @property
    def attributes_offset(self) -> int:
        return self._u(14, 8)

    @property
    def associated_images_offset(self) -> int:
        return self._u(22, 8)

    @property
    def icc_offset(self) -> int:
        return self._u(30, 8)

    @property
    def annotations_offset(self) -> int:
        return self._u(38, 8)

    @property
    def annotation_groups_offset(self) -> int:
        return self._u(46, 8)


class BlobView(BlockView):
    """ICC_PROFILE or BYTE_ARRAY: a prefix plus raw payload bytes."""

    @property
    def payload_size(self) -> int:
        return self._u(14, 8)

    @property
    def content_hint(self) -> int:
        return self._u(22, 2)

    def payload(self) -> memoryview:
        return self.view.slice(self.end, self.payload_size)


_HEADER_VIEWS = {
    BlockType.FILE_HEADER: FileHeaderView,
    BlockType.TILE_TABLE: TileTableView,
    BlockType.CLINICAL_METADATA: ClinicalMetadataView,
    BlockType.ICC_PROFILE: BlobView,
    BlockType.BYTE_ARRAY: BlobView,
}


def read_header_block(view: FileView, offset: int, expected_type: BlockType) -> BlockView:
    """Open a typed view of a fixed-field block after local checks."""
    problems = prefix_problems(view, offset, expected_type)
    if problems:
        code, message = problems[0]
        raise FormatError(f"{code}: {message}")
    cls = _HEADER_VIEWS.get(expected_type)
    if cls is None:
        raise ValueError(f"{expected_type!r} is not a header block type")
    block = cls(view, offset)
    if isinstance(block, BlobView) and block.end + block.payload_size > len(view):
        raise FormatError(f"OUT_OF_BOUNDS: payload of block at {offset} "
                          f"({block.payload_size} bytes) runs past end of file")
    return block


class ArrayView(BlockView):
    """View of an array block: header, stored stride, entry accessors."""

    def __init__(self, view: FileView, offset: int, block_type: BlockType):
        super().__init__(view, offset)
        self.block_type = block_type
        self._codec = wire.ENTRY_CODECS[block_type]

    @property
    def entry_size(self) -> int:
        return self._u(14, 4)

    @property
    def count(self) -> int:
        return self._u(18, 4)

    @property
    def pool_offset(self) -> int:
        if self.block_type not in wire.POOLED_ARRAY_TYPES:
            return 0
        return self._u(22, 8)

    @property
    def entries_start(self) -> int:
        return self.offset + self.prefix.fixed_size

    @property
    def entries_end(self) -> int:
        return self.entries_start + self.entry_size * self.count

    def entry(self, i: int):
        """Decode entry ``i``, reading only the prefix this version knows."""
        if not 0 <= i < self.count:
            raise IndexError(f"entry {i} outside [0, {self.count})")
        return self._codec.unpack_from(self.view.data, self.entries_start + i * self.entry_size)

    def __iter__(self):
        for i in range(self.count):
            yield self.entry(i)

    def __len__(self) -> int:
        return self.count


def read_array(view: FileView, offset: int, expected_type: BlockType) -> ArrayView:
    """Open an array block after local checks (stride, bounds)."""
    if expected_type not in wire.ARRAY_BLOCK_TYPES:
        raise ValueError(f"{expected_type!r} is not an array block type")
    problems = prefix_problems(view, offset, expected_type)
    if problems:
        code, message = problems[0]
        raise FormatError(f"{code}: {message}")
    array = ArrayView(view, offset, expected_type)
    if array.entry_size < wire.MIN_ENTRY_SIZES[expected_type]:
        raise FormatError(f"ENTRY_TOO_SMALL: array at {offset} stores entry size "
                          f"{array.entry_size}, below the known minimum "
                          f"{wire.MIN_ENTRY_SIZES[expected_type]} for {expected_type.name}")
    if array.entries_end > len(view):
        raise FormatError(f"OUT_OF_BOUNDS: entries of array at {offset} end at "
                          f"{array.entries_end}, past end of file ({len(view)} bytes)")
    return array


def tile_record(offsets: ArrayView, index: int):
    """Entry of the TILE_OFFSETS array at a global tile index.

    Returns a TileOffsetEntry, or SPARSE when the entry holds the
    sparse sentinel.
    """
    entry = offsets.entry(index)
    if entry.is_sparse:
        return SPARSE
    return entry
