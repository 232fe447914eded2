"""Serialization of blocks into a growing file.

Placement and serialization are decoupled so tile payloads can be
written from any number of threads: workers claim disjoint byte ranges
from a shared ReservationAllocator (one atomic counter) and then write
into their ranges independently, in any order, from any pyramid layer.
Structure blocks are written wherever the caller reserved room for
them, and the file header is patched in last by finalize() into the
46-byte region at offset 0 that the allocator never hands out.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass

from . import wire
from .errors import CapacityError
from .wire import BlockType

_CURSOR_LIMIT = 1 << 63


class ReservationAllocator:
    """Hands out unique, non-overlapping byte ranges of a file under
    construction. reserve() is linearizable: safe from any number of
    threads."""

    def __init__(self, start: int = wire.FILE_HEADER_SIZE):
        self._cursor = start
        self._lock = threading.Lock()

    def reserve(self, size: int) -> int:
        """Claim ``size`` bytes; returns the start offset of the range."""
        if size <= 0:
            raise ValueError(f"reservation size must be positive, got {size}")
        with self._lock:
            offset = self._cursor
            new_cursor = offset + size
            if new_cursor > _CURSOR_LIMIT:
                raise CapacityError("file would exceed the 2^63-byte writer limit")
            self._cursor = new_cursor
        return offset

    @property
    def cursor(self) -> int:
        with self._lock:
            return self._cursor


@dataclass(frozen=True)
class WriteReceipt:
    """Record of one completed write; block_type is None for a raw tile
    payload."""

    offset: int
    size: int
    block_type: BlockType | None

    @property
    def end(self) -> int:
        return self.offset + self.size


class BufferSink:
    """In-memory sink; grows on demand, positional writes are locked."""

    def __init__(self):
        self._buf = bytearray()
        self._lock = threading.Lock()

    def write_at(self, offset: int, data) -> None:
        end = offset + len(data)
        with self._lock:
            if end > len(self._buf):
                self._buf.extend(bytes(end - len(self._buf)))
            self._buf[offset:end] = data

    def set_length(self, length: int) -> None:
        with self._lock:
            if length > len(self._buf):
                self._buf.extend(bytes(length - len(self._buf)))
            else:
                del self._buf[length:]

    def getvalue(self) -> bytes:
        with self._lock:
            return bytes(self._buf)

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class FileSink:
    """File-backed sink using positional writes (pwrite), so concurrent
    writers touching disjoint ranges need no locking."""

    def __init__(self, path):
        self.path = os.fspath(path)
        self._fd = os.open(self.path, os.O_RDWR | os.O_CREAT | os.O_TRUNC, 0o644)

    def write_at(self, offset: int, data) -> None:
        view = memoryview(data)
        while len(view):
            written = os.pwrite(self._fd, view, offset)
            view = view[written:]
            offset += written

    def set_length(self, length: int) -> None:
        os.ftruncate(self._fd, length)

    def close(self) -> None:
        if self._fd is not None:
            os.close(self._fd)
            self._fd = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _pack_prefix(offset: int, block_type: BlockType) -> bytearray:
    buf = bytearray(wire.FIXED_SIZES[block_type])
    wire.BlockPrefix.for_block(offset, block_type).pack_into(buf, 0)
    return buf


def write_header_block(sink, offset: int, block_type: BlockType, fields) -> WriteReceipt:
    """Write a fixed-field block (TILE_TABLE or CLINICAL_METADATA) at a
    reserved offset. The prefix's validation tag is the offset itself."""
    buf = _pack_prefix(offset, block_type)
    if block_type is BlockType.TILE_TABLE:
        wire.TILE_TABLE_FIELDS.pack_into(
            buf, wire.PREFIX_SIZE,
            fields.extents_offset, fields.offsets_offset,
            fields.encoding_format, fields.pixel_format,
            fields.layer_count, fields.tile_dimension)
    elif block_type is BlockType.CLINICAL_METADATA:
        wire.CLINICAL_METADATA_FIELDS.pack_into(
            buf, wire.PREFIX_SIZE,
            fields.attributes_offset, fields.associated_images_offset,
            fields.icc_offset, fields.annotations_offset,
            fields.annotation_groups_offset)
    else:
        raise ValueError(f"{block_type!r} is not a plain header block")
    sink.write_at(offset, buf)
    return WriteReceipt(offset, len(buf), block_type)


def array_block_size(block_type: BlockType, entry_size: int, entry_count: int) -> int:
    return wire.FIXED_SIZES[block_type] + entry_size * entry_count


def write_array_block(sink, offset: int, block_type: BlockType, entry_size: int,
                      entries, pool_offset: int = 0) -> WriteReceipt:
    """Write an array block: header plus tightly packed entries.

    ``entry_size`` is the stored stride and may exceed the natural entry
    size (entries are zero-padded), which is how future versions grow
    entries without breaking older readers. Metadata arrays carry
    ``pool_offset``, the companion BYTE_ARRAY holding their variable
    payloads.
    """
    if block_type not in wire.ARRAY_BLOCK_TYPES:
        raise ValueError(f"{block_type!r} is not an array block")
    if entry_size < wire.MIN_ENTRY_SIZES[block_type]:
        raise ValueError(f"entry_size {entry_size} below minimum "
                         f"{wire.MIN_ENTRY_SIZES[block_type]} for {block_type.name}")
    fixed = wire.FIXED_SIZES[block_type]
    buf = _pack_prefix(offset, block_type)
    wire.ARRAY_HEADER_FIELDS.pack_into(buf, wire.PREFIX_SIZE, entry_size, len(entries))
    if block_type in wire.POOLED_ARRAY_TYPES:
        wire.POOL_OFFSET_FIELD.pack_into(buf, wire.PREFIX_SIZE + 8, pool_offset)
    body = bytearray(entry_size * len(entries))
    for i, entry in enumerate(entries):
        packed = entry.pack()
        if len(packed) > entry_size:
            raise ValueError(f"entry {i} packs to {len(packed)} bytes, "
                             f"exceeding entry_size {entry_size}")
        body[i * entry_size:i * entry_size + len(packed)] = packed
    sink.write_at(offset, bytes(buf) + bytes(body))
    return WriteReceipt(offset, fixed + len(body), block_type)


def write_blob_block(sink, offset: int, block_type: BlockType, payload,
                     content_hint: int = 0) -> WriteReceipt:
    """Write an ICC_PROFILE or BYTE_ARRAY block wrapping raw payload bytes."""
    if block_type not in wire.BLOB_BLOCK_TYPES:
        raise ValueError(f"{block_type!r} is not a blob block")
    buf = _pack_prefix(offset, block_type)
    wire.BLOB_HEADER_FIELDS.pack_into(buf, wire.PREFIX_SIZE, len(payload), content_hint)
    sink.write_at(offset, bytes(buf) + bytes(payload))
    return WriteReceipt(offset, len(buf) + len(payload), block_type)


def write_tile_payload(sink, offset: int, data) -> WriteReceipt:
    """Write one tile's compressed bytes verbatim; no prefix is added.

    Tiles are located solely through the TILE_OFFSETS array. Zero-length
    payloads are illegal; an absent tile must be a sparse entry instead.
    """
    if len(data) == 0:
        raise ValueError("tile payloads cannot be empty; use a sparse entry")
    sink.write_at(offset, data)
    return WriteReceipt(offset, len(data), None)


def finalize(sink, file_size: int, tile_table_offset: int, metadata_offset: int) -> WriteReceipt:
    """Patch the FILE_HEADER into offset 0 once every block has landed.

    Deterministic: finalizing twice produces identical bytes. The sink
    is extended (or trimmed) to exactly ``file_size``.
    """
    if tile_table_offset < wire.FILE_HEADER_SIZE or metadata_offset < wire.FILE_HEADER_SIZE:
        raise ValueError("tile-table and metadata offsets must lie past the file header")
    buf = _pack_prefix(0, BlockType.FILE_HEADER)
    wire.FILE_HEADER_FIELDS.pack_into(
        buf, wire.PREFIX_SIZE,
        wire.FILE_MAGIC, wire.SPEC_MAJOR, wire.SPEC_MINOR,
        file_size, tile_table_offset, metadata_offset)
    sink.write_at(0, buf)
    sink.set_length(file_size)
    return WriteReceipt(0, len(buf), BlockType.FILE_HEADER)
