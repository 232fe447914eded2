"""On-disk structures of the Iris slide container, version 1.0.

Everything in this module is pure arithmetic over buffers: no file I/O.
All multi-byte fields are little-endian; floating-point fields are
IEEE-754 binary32/binary64 bit patterns, independent of host endianness.

A file is a sequence of *data-blocks* placed at arbitrary byte offsets
and linked by absolute offsets (the offset-chain). Every block begins
with the same 14-byte prefix:

    +0   u64  validation_tag   absolute offset of this block in the file
    +8   u32  recovery_tag     (0x49FE << 16) | block_type
    +12  u8   block_version    1 for files of this version
    +13  u8   fixed_size       length of the fixed-field region incl. prefix

Reading the first eight bytes at offset x must therefore yield x, which
makes deep validation a pointer-chase plus equality checks, and lets a
recovery scan find blocks in a damaged stream by searching for positions
whose leading u64 encodes their own location.

Block fixed-field layouts after the prefix (offsets relative to block
start, sizes in bytes):

    FILE_HEADER (46, at offset 0, validation_tag == 0)
        14  u32  magic = 0x53495249 ("IRIS")
        18  u16  spec_major = 1
        20  u16  spec_minor = 0
        22  u64  file_size
        30  u64  tile_table_offset
        38  u64  metadata_offset

    TILE_TABLE (42)
        14  u64  extents_offset      -> LAYER_EXTENTS
        22  u64  offsets_offset      -> TILE_OFFSETS
        30  u16  encoding_format
        32  u16  pixel_format
        34  u32  layer_count
        38  u32  tile_dimension      always 256 in v1.0

    CLINICAL_METADATA (54): five u64 offsets at +14 in order
        attributes, associated_images, icc, annotations, annotation_groups
        (0 = absent)

    array blocks (LAYER_EXTENTS, TILE_OFFSETS: 22; the four metadata
    arrays: 30)
        14  u32  entry_size          stride as encoded; may exceed the
                                     minimum this version defines
        18  u32  entry_count
        [22 u64  pool_offset]        metadata arrays only: companion
                                     BYTE_ARRAY holding their variable
                                     payloads, 0 = none
        entries follow at +fixed_size, tightly packed with the stored
        stride; readers consume the prefix they know and skip the rest

    blob blocks (ICC_PROFILE, BYTE_ARRAY: 24)
        14  u64  payload_size
        22  u16  content_hint        owning block type, informational
        payload follows at +24

Array entries (minimum sizes; future versions may append fields):

    LayerExtent (16):        u32 x_tiles, u32 y_tiles, f32 scale, u32 reserved
    TileOffsetEntry (12):    u64 tile_offset, u32 tile_size
    AttributeEntry (16):     u16 key_format, u16 key_size, u32 value_size,
                             u64 blob_offset
    AssociatedImageEntry (32): u64 payload_offset, u32 payload_size,
                             u16 encoding_format, u16 pixel_format,
                             u32 width, u32 height, u16 label,
                             u16 + u32 reserved
    AnnotationEntry (48):    u32 identifier, u16 type, u16 reserved,
                             f32 x, f32 y, f32 width, f32 height,
                             u32 raster_width, u32 raster_height,
                             u64 payload_offset, u32 payload_size,
                             u32 parent_id
    AnnotationGroupEntry (24): u64 name_offset, u32 name_size,
                             u32 member_count, u64 members_offset

Tile pixel payloads are raw byte ranges without any prefix, located
solely through the TILE_OFFSETS array; the array is ordered by the
global tile index even though payload placement is free.
"""

from __future__ import annotations

import bisect
import struct
from dataclasses import dataclass, field
from enum import IntEnum

RECOVERY_MAGIC = 0x49FE
FILE_MAGIC = 0x53495249  # b"IRIS" when serialized little-endian
SPEC_MAJOR = 1
SPEC_MINOR = 0
TILE_DIMENSION = 256

PREFIX_SIZE = 14
FILE_HEADER_SIZE = 46

#: tile_offset value marking a tile with no stored payload
SPARSE_OFFSET = 0xFFFF_FFFF_FFFF_FFFF


class BlockType(IntEnum):
    FILE_HEADER = 0x01
    TILE_TABLE = 0x02
    CLINICAL_METADATA = 0x03
    LAYER_EXTENTS = 0x04
    TILE_OFFSETS = 0x05
    ATTRIBUTES = 0x06
    ASSOCIATED_IMAGES = 0x07
    ICC_PROFILE = 0x08
    ANNOTATIONS = 0x09
    ANNOTATION_GROUPS = 0x0A
    BYTE_ARRAY = 0x0B


class EncodingFormat(IntEnum):
    JPEG = 1
    AVIF = 2
    IRIS_CODEC = 3  # reserved: structurally legal, never decodable here
    RAW_TEST = 0x7FFF  # uncompressed pixels, testing and benchmarks


class PixelFormat(IntEnum):
    R8G8B8 = 1
    R8G8B8A8 = 2

    @property
    def bytes_per_pixel(self) -> int:
        return 3 if self is PixelFormat.R8G8B8 else 4


class KeyFormat(IntEnum):
    DICOM_TAG = 1  # key bytes are a 4-byte group/element pair
    ASCII_KEY = 2


class ImageLabel(IntEnum):
    THUMBNAIL = 1
    LABEL = 2
    MACRO = 3


class AnnotationType(IntEnum):
    TEXT_UTF8 = 1
    PNG = 2
    JPEG = 3
    SVG = 4


#: exact fixed-field sizes for blocks written by this version
FIXED_SIZES: dict[BlockType, int] = {
    BlockType.FILE_HEADER: 46,
    BlockType.TILE_TABLE: 42,
    BlockType.CLINICAL_METADATA: 54,
    BlockType.LAYER_EXTENTS: 22,
    BlockType.TILE_OFFSETS: 22,
    BlockType.ATTRIBUTES: 30,
    BlockType.ASSOCIATED_IMAGES: 30,
    BlockType.ANNOTATIONS: 30,
    BlockType.ANNOTATION_GROUPS: 30,
    BlockType.ICC_PROFILE: 24,
    BlockType.BYTE_ARRAY: 24,
}

#: minimum entry strides readers of this version understand
MIN_ENTRY_SIZES: dict[BlockType, int] = {
    BlockType.LAYER_EXTENTS: 16,
    BlockType.TILE_OFFSETS: 12,
    BlockType.ATTRIBUTES: 16,
    BlockType.ASSOCIATED_IMAGES: 32,
    BlockType.ANNOTATIONS: 48,
    BlockType.ANNOTATION_GROUPS: 24,
}

ARRAY_BLOCK_TYPES = frozenset(MIN_ENTRY_SIZES)
BLOB_BLOCK_TYPES = frozenset({BlockType.ICC_PROFILE, BlockType.BYTE_ARRAY})
#: metadata arrays that carry a pool_offset fixed field
POOLED_ARRAY_TYPES = frozenset({
    BlockType.ATTRIBUTES,
    BlockType.ASSOCIATED_IMAGES,
    BlockType.ANNOTATIONS,
    BlockType.ANNOTATION_GROUPS,
})

_UINT = {2: struct.Struct("<H"), 4: struct.Struct("<I"), 8: struct.Struct("<Q")}
_FLOAT = {2: struct.Struct("<e"), 4: struct.Struct("<f"), 8: struct.Struct("<d")}


def put_scalar(buf, offset: int, value, width: int) -> None:
    """Write one little-endian scalar into a writable buffer.

    Integers are written unsigned; floats as the IEEE-754 bit pattern of
    the given width (2, 4 or 8 bytes). The result is independent of host
    endianness and needs no alignment.
    """
    if width not in _UINT:
        raise ValueError(f"scalar width must be 2, 4 or 8, got {width}")
    codec = _FLOAT[width] if isinstance(value, float) else _UINT[width]
    if offset < 0 or offset + width > len(buf):
        raise IndexError(f"write of {width} bytes at {offset} exceeds buffer of {len(buf)}")
    codec.pack_into(buf, offset, value)


def get_scalar(buf, offset: int, width: int, kind: str = "uint"):
    """Read one little-endian scalar; inverse of :func:`put_scalar`.

    ``kind`` is ``"uint"`` or ``"float"``. Reading never requires host
    alignment and round-trips bit patterns exactly, including signed
    zeros, subnormals and the canonical quiet NaN.
    """
    if width not in _UINT:
        raise ValueError(f"scalar width must be 2, 4 or 8, got {width}")
    codec = _FLOAT[width] if kind == "float" else _UINT[width]
    if offset < 0 or offset + width > len(buf):
        raise IndexError(f"read of {width} bytes at {offset} exceeds buffer of {len(buf)}")
    return codec.unpack_from(buf, offset)[0]


def make_recovery_tag(block_type: int) -> int:
    return (RECOVERY_MAGIC << 16) | int(block_type)


def parse_recovery_tag(tag: int) -> int | None:
    """Return the block-type code of a recovery tag, or None.

    None means the value is not a recovery tag at all (magic mismatch).
    A valid magic with an unknown type code is returned as a plain int;
    recovery scans skip those rather than fail.
    """
    if (tag >> 16) != RECOVERY_MAGIC:
        return None
    return tag & 0xFFFF


def is_known_block_type(code: int) -> bool:
    return code in BlockType._value2member_map_


PREFIX = struct.Struct("<QIBB")


@dataclass(frozen=True)
class BlockPrefix:
    """The 14-byte prelude every data-block starts with."""

    validation_tag: int
    recovery_tag: int
    block_version: int
    fixed_size: int

    @property
    def block_type_code(self) -> int:
        return self.recovery_tag & 0xFFFF

    def pack_into(self, buf, offset: int) -> None:
        PREFIX.pack_into(buf, offset, self.validation_tag, self.recovery_tag,
                         self.block_version, self.fixed_size)

    @classmethod
    def for_block(cls, offset: int, block_type: BlockType) -> "BlockPrefix":
        return cls(offset, make_recovery_tag(block_type), 1, FIXED_SIZES[block_type])

    @classmethod
    def unpack_from(cls, buf, offset: int) -> "BlockPrefix":
        return cls(*PREFIX.unpack_from(buf, offset))


# Header-block field regions, excluding the prefix.
FILE_HEADER_FIELDS = struct.Struct("<IHHQQQ")     # magic, major, minor, file_size, tt, md
TILE_TABLE_FIELDS = struct.Struct("<QQHHII")      # extents, offsets, enc, pix, layers, tile_dim
CLINICAL_METADATA_FIELDS = struct.Struct("<QQQQQ")
ARRAY_HEADER_FIELDS = struct.Struct("<II")        # entry_size, entry_count
POOL_OFFSET_FIELD = struct.Struct("<Q")
BLOB_HEADER_FIELDS = struct.Struct("<QH")         # payload_size, content_hint

LAYER_EXTENT_ENTRY = struct.Struct("<IIfI")
TILE_OFFSET_ENTRY = struct.Struct("<QI")
ATTRIBUTE_ENTRY = struct.Struct("<HHIQ")
ASSOCIATED_IMAGE_ENTRY = struct.Struct("<QIHHIIHHI")
ANNOTATION_ENTRY = struct.Struct("<IHHffffIIQII")
ANNOTATION_GROUP_ENTRY = struct.Struct("<QIIQ")


@dataclass(frozen=True)
class FileHeader:
    file_size: int
    tile_table_offset: int
    metadata_offset: int
    spec_major: int = SPEC_MAJOR
    spec_minor: int = SPEC_MINOR
    magic: int = FILE_MAGIC


@dataclass(frozen=True)
class TileTable:
    extents_offset: int
    offsets_offset: int
    encoding_format: int
    pixel_format: int
    layer_count: int
    tile_dimension: int = TILE_DIMENSION


@dataclass(frozen=True)
class ClinicalMetadata:
    """Offsets of the optional metadata blocks; 0 marks an absent one."""

    attributes_offset: int = 0
    associated_images_offset: int = 0
    icc_offset: int = 0
    annotations_offset: int = 0
    annotation_groups_offset: int = 0


@dataclass(frozen=True)
class LayerExtent:
    x_tiles: int
    y_tiles: int
    scale: float

    @property
    def tile_count(self) -> int:
        return self.x_tiles * self.y_tiles

    def pack(self) -> bytes:
        return LAYER_EXTENT_ENTRY.pack(self.x_tiles, self.y_tiles, self.scale, 0)

    @classmethod
    def unpack_from(cls, buf, offset: int) -> "LayerExtent":
        x, y, scale, _ = LAYER_EXTENT_ENTRY.unpack_from(buf, offset)
        return cls(x, y, scale)


@dataclass(frozen=True)
class TileOffsetEntry:
    tile_offset: int
    tile_size: int

    @property
    def is_sparse(self) -> bool:
        return self.tile_offset == SPARSE_OFFSET and self.tile_size == 0

    def pack(self) -> bytes:
        return TILE_OFFSET_ENTRY.pack(self.tile_offset, self.tile_size)

    @classmethod
    def sparse(cls) -> "TileOffsetEntry":
        return cls(SPARSE_OFFSET, 0)

    @classmethod
    def unpack_from(cls, buf, offset: int) -> "TileOffsetEntry":
        return cls(*TILE_OFFSET_ENTRY.unpack_from(buf, offset))


@dataclass(frozen=True)
class AttributeEntry:
    key_format: int
    key_size: int
    value_size: int
    blob_offset: int  # absolute offset of key bytes, value bytes follow

    def pack(self) -> bytes:
        return ATTRIBUTE_ENTRY.pack(self.key_format, self.key_size,
                                    self.value_size, self.blob_offset)

    @classmethod
    def unpack_from(cls, buf, offset: int) -> "AttributeEntry":
        return cls(*ATTRIBUTE_ENTRY.unpack_from(buf, offset))


@dataclass(frozen=True)
class AssociatedImageEntry:
    payload_offset: int
    payload_size: int
    encoding_format: int
    pixel_format: int
    width: int
    height: int
    label: int

    def pack(self) -> bytes:
        return ASSOCIATED_IMAGE_ENTRY.pack(self.payload_offset, self.payload_size,
                                           self.encoding_format, self.pixel_format,
                                           self.width, self.height, self.label, 0, 0)

    @classmethod
    def unpack_from(cls, buf, offset: int) -> "AssociatedImageEntry":
        fields = ASSOCIATED_IMAGE_ENTRY.unpack_from(buf, offset)
        return cls(*fields[:7])


@dataclass(frozen=True)
class AnnotationEntry:
    identifier: int
    annotation_type: int
    x: float
    y: float
    width: float
    height: float
    raster_width: int
    raster_height: int
    payload_offset: int
    payload_size: int
    parent_id: int = 0

    def pack(self) -> bytes:
        return ANNOTATION_ENTRY.pack(self.identifier, self.annotation_type, 0,
                                     self.x, self.y, self.width, self.height,
                                     self.raster_width, self.raster_height,
                                     self.payload_offset, self.payload_size,
                                     self.parent_id)

    @classmethod
    def unpack_from(cls, buf, offset: int) -> "AnnotationEntry":
        (ident, atype, _res, x, y, w, h, rw, rh,
         poff, psize, parent) = ANNOTATION_ENTRY.unpack_from(buf, offset)
        return cls(ident, atype, x, y, w, h, rw, rh, poff, psize, parent)


@dataclass(frozen=True)
class AnnotationGroupEntry:
    name_offset: int
    name_size: int
    member_count: int
    members_offset: int  # packed u32 identifiers

    def pack(self) -> bytes:
        return ANNOTATION_GROUP_ENTRY.pack(self.name_offset, self.name_size,
                                           self.member_count, self.members_offset)

    @classmethod
    def unpack_from(cls, buf, offset: int) -> "AnnotationGroupEntry":
        return cls(*ANNOTATION_GROUP_ENTRY.unpack_from(buf, offset))


ENTRY_CODECS = {
    BlockType.LAYER_EXTENTS: LayerExtent,
    BlockType.TILE_OFFSETS: TileOffsetEntry,
    BlockType.ATTRIBUTES: AttributeEntry,
    BlockType.ASSOCIATED_IMAGES: AssociatedImageEntry,
    BlockType.ANNOTATIONS: AnnotationEntry,
    BlockType.ANNOTATION_GROUPS: AnnotationGroupEntry,
}


@dataclass(frozen=True)
class PyramidLayout:
    """Ordered layer extents plus the global tile index arithmetic.

    Layers run from the lowest-resolution level (layer 0, scale 1.0)
    towards the highest. Tiles are numbered layer-major and row-major
    within a layer, upper-left first, into one flat index space.
    """

    layers: tuple[LayerExtent, ...]
    layer_base: tuple[int, ...] = field(init=False)
    total_tiles: int = field(init=False)

    def __post_init__(self):
        if not self.layers:
            raise ValueError("layout needs at least one layer")
        base = [0]
        for extent in self.layers:
            if extent.x_tiles < 1 or extent.y_tiles < 1:
                raise ValueError(f"layer extent {extent} has an empty dimension")
            base.append(base[-1] + extent.tile_count)
        object.__setattr__(self, "layer_base", tuple(base[:-1]))
        object.__setattr__(self, "total_tiles", base[-1])

    @property
    def layer_count(self) -> int:
        return len(self.layers)

    @property
    def slide_space_size(self) -> tuple[float, float]:
        """Extent of the annotation coordinate system, in layer-0 tiles."""
        return (float(self.layers[0].x_tiles), float(self.layers[0].y_tiles))

    def global_index(self, layer: int, x: int, y: int) -> int:
        if not 0 <= layer < len(self.layers):
            raise ValueError(f"layer {layer} outside [0, {len(self.layers)})")
        extent = self.layers[layer]
        if not (0 <= x < extent.x_tiles and 0 <= y < extent.y_tiles):
            raise ValueError(f"tile ({x}, {y}) outside layer {layer} extent "
                             f"{extent.x_tiles}x{extent.y_tiles}")
        return self.layer_base[layer] + y * extent.x_tiles + x

    def locate(self, index: int) -> tuple[int, int, int]:
        """Inverse of :meth:`global_index`: index -> (layer, x, y)."""
        if not 0 <= index < self.total_tiles:
            raise ValueError(f"tile index {index} outside [0, {self.total_tiles})")
        layer = bisect.bisect_right(self.layer_base, index) - 1
        y, x = divmod(index - self.layer_base[layer], self.layers[layer].x_tiles)
        return (layer, x, y)
