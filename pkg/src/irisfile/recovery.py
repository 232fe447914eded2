"""Corruption recovery: scan, rebuild, salvage.

Because every block opens with its own absolute offset followed by a
type-bearing recovery tag, a damaged stream can be searched for the
two-byte recovery magic and each hit cheaply confirmed against the
64-bit self-offset — a false positive needs ~80 bits of coincidence, so
random data produces essentially none. From the surviving candidate
blocks the structure is rebuilt (offset-chain cross-references first,
then lowest offset as the deterministic tie-break) and a fresh valid
file is written through the block writer. Salvage never fabricates
content: every recovered tile payload and metadata blob is a verbatim
copy of a readable range of the damaged input; anything unreadable or
structurally poisonous is dropped, with a report entry, and lost tiles
become sparse entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import wire
from .errors import UnrecoverableError
from .reader import (ArrayView, BlobView, ClinicalMetadataView, FileView,
                     TileTableView, open_view)
from .wire import (AnnotationEntry, BlockType, LayerExtent, PyramidLayout,
                   TileOffsetEntry)
from .writer import (FileSink, ReservationAllocator, array_block_size, finalize,
                     write_array_block, write_blob_block, write_header_block,
                     write_tile_payload)

# The recovery magic 0x49FE occupies bytes 10..12 of a block when
# serialized little-endian (high half of the u32 at +8).
_NEEDLE = wire.RECOVERY_MAGIC.to_bytes(2, "little")
_NEEDLE_SHIFT = 10


@dataclass(frozen=True)
class CandidateBlock:
    """A position whose bytes look like a block prefix.

    Guaranteed on construction: the u64 at ``offset`` equals the offset,
    the recovery magic matches, and the type code is known. Confidence
    counts the additional checks that passed (version byte, exact fixed
    size, fixed region in bounds).
    """

    offset: int
    block_type: BlockType
    confidence: int


@dataclass
class SalvageReport:
    candidates_found: int = 0
    adopted: dict[str, int] = field(default_factory=dict)  # type name -> offset
    conflicts: list[str] = field(default_factory=list)
    dropped: list[str] = field(default_factory=list)
    tiles_total: int = 0
    tiles_salvaged: int = 0  # carried over intact, sparse ones included
    tiles_lost: int = 0      # unreadable; sparse in the output
    sparse_tiles: int = 0
    bytes_recovered: int = 0
    output_size: int = 0

    def to_dict(self) -> dict:
        return {
            "candidates_found": self.candidates_found,
            "adopted": dict(self.adopted),
            "conflicts": list(self.conflicts),
            "dropped": list(self.dropped),
            "tiles": {
                "total": self.tiles_total,
                "salvaged": self.tiles_salvaged,
                "lost": self.tiles_lost,
                "sparse": self.sparse_tiles,
            },
            "bytes_recovered": self.bytes_recovered,
            "output_size": self.output_size,
        }

    def summary(self) -> str:
        return (f"salvaged {self.tiles_salvaged}/{self.tiles_total} tiles "
                f"({self.tiles_lost} lost, {self.sparse_tiles} sparse), "
                f"{self.bytes_recovered} payload bytes, "
                f"{len(self.conflicts)} conflict(s), {len(self.dropped)} dropped item(s)")


def scan_candidates(view: FileView) -> list[CandidateBlock]:
    """Find every plausible block prefix in the stream, in offset order.

    Works on arbitrarily damaged input: each byte position p qualifies
    when the u64 at p encodes p itself and the u32 at p+8 carries the
    recovery magic with a known block type. Position 0 additionally
    requires the file magic, since a leading run of zero bytes would
    otherwise satisfy the self-offset rule trivially. Unknown type codes
    under a valid magic are skipped, never fatal.
    """
    data = view.data
    size = len(view)
    found = []
    q = view.find(_NEEDLE, 0)
    while q != -1:
        p = q - _NEEDLE_SHIFT
        if p >= 0 and p + 12 <= size:
            tag = wire.get_scalar(data, p, 8)
            if tag == p and _plausible_at_zero(view, p):
                type_code = wire.get_scalar(data, p + 8, 4) & 0xFFFF
                if wire.is_known_block_type(type_code):
                    found.append(_candidate(view, p, BlockType(type_code)))
        q = view.find(_NEEDLE, q + 1)
    return found


def _plausible_at_zero(view: FileView, p: int) -> bool:
    if p != 0:
        return True
    if wire.FILE_HEADER_SIZE > len(view):
        return False
    return wire.get_scalar(view.data, 14, 4) == wire.FILE_MAGIC


def _candidate(view: FileView, offset: int, block_type: BlockType) -> CandidateBlock:
    confidence = 3  # self-offset, magic, known type
    if offset + wire.PREFIX_SIZE <= len(view):
        prefix = wire.BlockPrefix.unpack_from(view.data, offset)
        if prefix.block_version == 1:
            confidence += 1
        if prefix.fixed_size == wire.FIXED_SIZES[block_type]:
            confidence += 1
        if offset + prefix.fixed_size <= len(view):
            confidence += 1
    return CandidateBlock(offset, block_type, confidence)


@dataclass
class RecoveredStructure:
    layout: PyramidLayout
    tile_entries: list[TileOffsetEntry]
    encoding_format: int
    pixel_format: int
    tile_dimension: int
    attributes: list[tuple[int, bytes, bytes]]  # key_format, key, value
    associated: list[tuple[int, int, int, int, int, bytes]]  # label, enc, pix, w, h, payload
    icc: bytes | None
    annotations: list[tuple[AnnotationEntry, bytes]]  # entry, payload
    groups: list[tuple[bytes, tuple[int, ...]]]  # name, member ids
    candidates_found: int
    adopted: dict[str, int]
    conflicts: list[str]
    dropped: list[str]


class _Rebuilder:
    def __init__(self, view: FileView, candidates: list[CandidateBlock]):
        self.view = view
        self.candidates = candidates
        self.by_type: dict[BlockType, list[CandidateBlock]] = {}
        for c in candidates:
            self.by_type.setdefault(c.block_type, []).append(c)
        self.offsets_by_type = {t: {c.offset for c in cs}
                                for t, cs in self.by_type.items()}
        self.conflicts: list[str] = []
        self.dropped: list[str] = []
        self.adopted: dict[str, int] = {}

    def drop(self, what: str) -> None:
        self.dropped.append(what)

    def run(self) -> RecoveredStructure:
        table, extents, offsets = self._choose_tile_chain()
        layout = self._parse_layout(extents)
        tile_entries = list(offsets)

        encoding = table.encoding_format if table is not None else 0
        pixel = table.pixel_format if table is not None else 0
        tile_dim = table.tile_dimension if table is not None else wire.TILE_DIMENSION
        if tile_dim != wire.TILE_DIMENSION:
            self.drop(f"tile dimension {tile_dim} from damaged table replaced with "
                      f"{wire.TILE_DIMENSION}")
            tile_dim = wire.TILE_DIMENSION
        if len(tile_entries) != layout.total_tiles:
            # Offsets array disagrees with the layout; trust the layout and
            # pad/trim so every tile has an entry (missing ones are lost).
            self.drop(f"tile-offsets array holds {len(tile_entries)} entries, layout "
                      f"defines {layout.total_tiles}; reconciling to the layout")
            tile_entries = (tile_entries[:layout.total_tiles]
                            + [TileOffsetEntry.sparse()]
                            * (layout.total_tiles - len(tile_entries)))

        meta = self._choose_metadata()
        attributes = associated = annotations = groups = None
        icc = None
        if meta is not None:
            attributes = self._metadata_array(meta.attributes_offset,
                                              BlockType.ATTRIBUTES)
            associated = self._metadata_array(meta.associated_images_offset,
                                              BlockType.ASSOCIATED_IMAGES)
            annotations = self._metadata_array(meta.annotations_offset,
                                               BlockType.ANNOTATIONS)
            groups = self._metadata_array(meta.annotation_groups_offset,
                                          BlockType.ANNOTATION_GROUPS)
            icc = self._read_icc(meta.icc_offset)

        annotation_rows = self._sift_annotations(annotations)
        kept_ids = {entry.identifier for entry, _ in annotation_rows}
        annotation_rows = [
            (entry if entry.parent_id in kept_ids or entry.parent_id == 0
             else self._unlink_parent(entry), payload)
            for entry, payload in annotation_rows]

        return RecoveredStructure(
            layout=layout,
            tile_entries=tile_entries,
            encoding_format=encoding,
            pixel_format=pixel,
            tile_dimension=tile_dim,
            attributes=self._sift_attributes(attributes),
            associated=self._sift_associated(associated),
            icc=icc,
            annotations=annotation_rows,
            groups=self._sift_groups(groups, kept_ids),
            candidates_found=len(self.candidates),
            adopted=self.adopted,
            conflicts=self.conflicts,
            dropped=self.dropped,
        )

    # -- choosing the tile chain -------------------------------------------

    def _choose_tile_chain(self):
        tables = []
        for cand in self.by_type.get(BlockType.TILE_TABLE, []):
            table = TileTableView(self.view, cand.offset)
            score = 0
            if table.extents_offset in self.offsets_by_type.get(BlockType.LAYER_EXTENTS, ()):
                score += 2
            if table.offsets_offset in self.offsets_by_type.get(BlockType.TILE_OFFSETS, ()):
                score += 2
            tables.append((score, cand, table))
        tables.sort(key=lambda t: (-t[0], -t[1].confidence, t[1].offset))
        if len(tables) > 1:
            self.conflicts.append(
                f"{len(tables)} tile-table candidates at offsets "
                f"{[t[1].offset for t in tables]}; adopting the best-ranked, "
                f"lowest-offset one at {tables[0][1].offset}")

        chosen_table = None
        extents = offsets = None
        if tables:
            chosen_table = tables[0][2]
            self.adopted["TILE_TABLE"] = tables[0][1].offset
            extents = self._usable_array(chosen_table.extents_offset,
                                         BlockType.LAYER_EXTENTS)
            offsets = self._usable_array(chosen_table.offsets_offset,
                                         BlockType.TILE_OFFSETS)
        if extents is None:
            extents = self._best_array(BlockType.LAYER_EXTENTS)
        if offsets is None:
            offsets = self._best_array(BlockType.TILE_OFFSETS)
        if extents is None or offsets is None:
            missing = "LAYER_EXTENTS" if extents is None else "TILE_OFFSETS"
            raise UnrecoverableError(
                f"no usable {missing} block survives; the pyramid cannot be rebuilt")
        self.adopted["LAYER_EXTENTS"] = extents.offset
        self.adopted["TILE_OFFSETS"] = offsets.offset
        return chosen_table, extents, offsets

    def _usable_array(self, offset: int, block_type: BlockType) -> ArrayView | None:
        if offset not in self.offsets_by_type.get(block_type, ()):
            return None
        return self._parse_array(offset, block_type)

    def _parse_array(self, offset: int, block_type: BlockType) -> ArrayView | None:
        try:
            array = ArrayView(self.view, offset, block_type)
        except Exception:
            return None
        if array.entry_size < wire.MIN_ENTRY_SIZES[block_type]:
            return None
        if array.entries_end > len(self.view):
            return None
        return array

    def _best_array(self, block_type: BlockType) -> ArrayView | None:
        ranked = sorted(self.by_type.get(block_type, []),
                        key=lambda c: (-c.confidence, c.offset))
        if len(ranked) > 1:
            self.conflicts.append(
                f"{len(ranked)} {block_type.name} candidates; adopting the "
                f"best-ranked, lowest-offset one")
        for cand in ranked:
            array = self._parse_array(cand.offset, block_type)
            if array is not None:
                return array
        return None

    def _parse_layout(self, extents: ArrayView) -> PyramidLayout:
        layers = []
        for i, ext in enumerate(extents):
            if ext.x_tiles < 1 or ext.y_tiles < 1:
                raise UnrecoverableError(
                    f"recovered layer {i} extent {ext.x_tiles}x{ext.y_tiles} is empty")
            layers.append(ext)
        if not layers:
            raise UnrecoverableError("recovered layer-extents array is empty")
        fixed = list(layers)
        if fixed[0].scale != 1.0:
            self.drop(f"layer 0 scale {fixed[0].scale!r} normalized to 1.0")
            fixed[0] = LayerExtent(fixed[0].x_tiles, fixed[0].y_tiles, 1.0)
        for i in range(1, len(fixed)):
            if not fixed[i].scale > fixed[i - 1].scale:
                self.drop(f"layer {i} scale {fixed[i].scale!r} not increasing; "
                          f"renormalized")
                fixed[i] = LayerExtent(fixed[i].x_tiles, fixed[i].y_tiles,
                                       fixed[i - 1].scale * 2.0)
        return PyramidLayout(tuple(fixed))

    # -- metadata subtree ---------------------------------------------------

    def _choose_metadata(self) -> ClinicalMetadataView | None:
        ranked = []
        for cand in self.by_type.get(BlockType.CLINICAL_METADATA, []):
            meta = ClinicalMetadataView(self.view, cand.offset)
            score = 0
            for offset, block_type in (
                    (meta.attributes_offset, BlockType.ATTRIBUTES),
                    (meta.associated_images_offset, BlockType.ASSOCIATED_IMAGES),
                    (meta.icc_offset, BlockType.ICC_PROFILE),
                    (meta.annotations_offset, BlockType.ANNOTATIONS),
                    (meta.annotation_groups_offset, BlockType.ANNOTATION_GROUPS)):
                if offset and offset in self.offsets_by_type.get(block_type, ()):
                    score += 1
            ranked.append((score, cand, meta))
        ranked.sort(key=lambda t: (-t[0], -t[1].confidence, t[1].offset))
        if len(ranked) > 1:
            self.conflicts.append(
                f"{len(ranked)} clinical-metadata candidates; adopting the one "
                f"at offset {ranked[0][1].offset}")
        if not ranked:
            self.drop("no clinical-metadata block found; optional metadata lost")
            return None
        self.adopted["CLINICAL_METADATA"] = ranked[0][1].offset
        return ranked[0][2]

    def _metadata_array(self, offset: int, block_type: BlockType) -> ArrayView | None:
        if not offset:
            return None
        array = self._usable_array(offset, block_type)
        if array is None:
            self.drop(f"{block_type.name} block at {offset} unusable; dropped")
        else:
            self.adopted[block_type.name] = offset
        return array

    def _read_icc(self, offset: int) -> bytes | None:
        if not offset:
            return None
        if offset not in self.offsets_by_type.get(BlockType.ICC_PROFILE, ()):
            self.drop(f"ICC_PROFILE block at {offset} unusable; dropped")
            return None
        blob = BlobView(self.view, offset)
        if blob.end + blob.payload_size > len(self.view):
            self.drop(f"ICC_PROFILE payload at {offset} truncated; dropped")
            return None
        self.adopted["ICC_PROFILE"] = offset
        return bytes(blob.payload())

    def _readable(self, start: int, size: int) -> bool:
        return 0 <= start and size >= 0 and start + size <= len(self.view)

    def _sift_attributes(self, array: ArrayView | None):
        kept = []
        for i, e in enumerate(array or ()):
            if e.key_size < 1 or \
                    (e.key_format == wire.KeyFormat.DICOM_TAG and e.key_size != 4):
                self.drop(f"attribute {i} has a malformed key; dropped")
                continue
            if not self._readable(e.blob_offset, e.key_size + e.value_size):
                self.drop(f"attribute {i} blob unreadable; dropped")
                continue
            key = bytes(self.view.slice(e.blob_offset, e.key_size))
            value = bytes(self.view.slice(e.blob_offset + e.key_size, e.value_size))
            kept.append((e.key_format, key, value))
        return kept

    def _sift_associated(self, array: ArrayView | None):
        kept = []
        for i, e in enumerate(array or ()):
            if e.label not in wire.ImageLabel._value2member_map_ \
                    or e.width < 1 or e.height < 1:
                self.drop(f"associated image {i} malformed; dropped")
                continue
            if not self._readable(e.payload_offset, e.payload_size):
                self.drop(f"associated image {i} payload unreadable; dropped")
                continue
            payload = bytes(self.view.slice(e.payload_offset, e.payload_size))
            kept.append((e.label, e.encoding_format, e.pixel_format,
                         e.width, e.height, payload))
        return kept

    def _sift_annotations(self, array: ArrayView | None):
        kept = []
        seen = set()
        for i, e in enumerate(array or ()):
            if e.identifier == 0 or e.identifier in seen \
                    or e.raster_width < 1 or e.raster_height < 1:
                self.drop(f"annotation {i} (id {e.identifier}) malformed; dropped")
                continue
            if not self._readable(e.payload_offset, e.payload_size):
                self.drop(f"annotation id {e.identifier} payload unreadable; dropped")
                continue
            seen.add(e.identifier)
            kept.append((e, bytes(self.view.slice(e.payload_offset, e.payload_size))))
        return kept

    def _unlink_parent(self, entry: AnnotationEntry) -> AnnotationEntry:
        self.drop(f"annotation {entry.identifier} parent {entry.parent_id} missing; "
                  f"link cleared")
        return AnnotationEntry(entry.identifier, entry.annotation_type,
                               entry.x, entry.y, entry.width, entry.height,
                               entry.raster_width, entry.raster_height,
                               entry.payload_offset, entry.payload_size, 0)

    def _sift_groups(self, array: ArrayView | None, kept_ids: set[int]):
        kept = []
        for i, e in enumerate(array or ()):
            if e.name_size < 1 or not self._readable(e.name_offset, e.name_size):
                self.drop(f"annotation group {i} name unreadable; dropped")
                continue
            if not self._readable(e.members_offset, e.member_count * 4):
                self.drop(f"annotation group {i} member list unreadable; dropped")
                continue
            name = bytes(self.view.slice(e.name_offset, e.name_size))
            members = []
            for m in range(e.member_count):
                member = wire.get_scalar(self.view.data, e.members_offset + 4 * m, 4)
                if member in kept_ids:
                    members.append(member)
                else:
                    self.drop(f"group {i} member {member} no longer exists; removed")
            kept.append((name, tuple(members)))
        return kept


def rebuild(view: FileView, candidates: list[CandidateBlock]) -> RecoveredStructure:
    """Reassemble the block graph from scan candidates.

    The tile-table is chosen by offset-chain cross-reference when intact
    (its stored offsets pointing at surviving arrays), falling back to
    candidate confidence and finally lowest offset; conflicts are
    recorded either way. Raises UnrecoverableError when no usable
    LAYER_EXTENTS or TILE_OFFSETS block survives.
    """
    return _Rebuilder(view, candidates).run()


def salvage(view: FileView, recovered: RecoveredStructure, sink) -> SalvageReport:
    """Write a fresh, valid container from recovered structure.

    Tile payloads whose byte ranges lie inside the readable region are
    copied verbatim; unreadable tiles become sparse. The output always
    passes FULL validation.
    """
    own_sink = isinstance(sink, str) or hasattr(sink, "__fspath__")
    if own_sink:
        sink = FileSink(sink)
    try:
        return _salvage(view, recovered, sink)
    finally:
        if own_sink:
            sink.close()


def _salvage(view: FileView, recovered: RecoveredStructure, sink) -> SalvageReport:
    report = SalvageReport(
        candidates_found=recovered.candidates_found,
        adopted=dict(recovered.adopted),
        conflicts=list(recovered.conflicts),
        dropped=list(recovered.dropped),
        tiles_total=recovered.layout.total_tiles,
    )
    allocator = ReservationAllocator()
    layout = recovered.layout

    entry_size = wire.MIN_ENTRY_SIZES[BlockType.TILE_OFFSETS]
    extent_size = wire.MIN_ENTRY_SIZES[BlockType.LAYER_EXTENTS]
    table_offset = allocator.reserve(wire.FIXED_SIZES[BlockType.TILE_TABLE])
    extents_offset = allocator.reserve(
        array_block_size(BlockType.LAYER_EXTENTS, extent_size, layout.layer_count))
    offsets_offset = allocator.reserve(
        array_block_size(BlockType.TILE_OFFSETS, entry_size, layout.total_tiles))
    meta_offset = allocator.reserve(wire.FIXED_SIZES[BlockType.CLINICAL_METADATA])
    meta = _emit_metadata(recovered, sink, allocator)

    out_entries = []
    for index, entry in enumerate(recovered.tile_entries):
        if entry.is_sparse:
            report.sparse_tiles += 1
            report.tiles_salvaged += 1
            out_entries.append(TileOffsetEntry.sparse())
            continue
        usable = (entry.tile_size > 0 and entry.tile_offset != wire.SPARSE_OFFSET
                  and entry.tile_offset + entry.tile_size <= len(view))
        if not usable:
            report.tiles_lost += 1
            out_entries.append(TileOffsetEntry.sparse())
            continue
        payload = view.slice(entry.tile_offset, entry.tile_size)
        offset = allocator.reserve(entry.tile_size)
        write_tile_payload(sink, offset, payload)
        out_entries.append(TileOffsetEntry(offset, entry.tile_size))
        report.tiles_salvaged += 1
        report.bytes_recovered += entry.tile_size

    write_array_block(sink, extents_offset, BlockType.LAYER_EXTENTS, extent_size,
                      list(layout.layers))
    write_array_block(sink, offsets_offset, BlockType.TILE_OFFSETS, entry_size,
                      out_entries)
    write_header_block(sink, table_offset, BlockType.TILE_TABLE,
                       wire.TileTable(extents_offset, offsets_offset,
                                      recovered.encoding_format,
                                      recovered.pixel_format,
                                      layout.layer_count,
                                      recovered.tile_dimension))
    write_header_block(sink, meta_offset, BlockType.CLINICAL_METADATA, meta)
    report.output_size = allocator.cursor
    finalize(sink, report.output_size, table_offset, meta_offset)
    return report


def _emit_metadata(recovered: RecoveredStructure, sink, allocator) -> wire.ClinicalMetadata:
    blob_fixed = wire.FIXED_SIZES[BlockType.BYTE_ARRAY]
    offsets = {}

    def emit(block_type, rows, build_pool, build_entry):
        if not rows:
            return
        pool = bytearray()
        rels = []
        for row in rows:
            rels.append(build_pool(pool, row))
        array_offset = allocator.reserve(
            array_block_size(block_type, wire.MIN_ENTRY_SIZES[block_type], len(rows)))
        pool_offset = 0
        if pool:
            pool_offset = allocator.reserve(blob_fixed + len(pool))
            write_blob_block(sink, pool_offset, BlockType.BYTE_ARRAY, pool,
                             content_hint=int(block_type))
        base = pool_offset + blob_fixed if pool_offset else 0
        entries = [build_entry(base, rel, row) for rel, row in zip(rels, rows)]
        write_array_block(sink, array_offset, block_type,
                          wire.MIN_ENTRY_SIZES[block_type], entries,
                          pool_offset=pool_offset)
        offsets[block_type] = array_offset

    def attr_pool(pool, row):
        rel = len(pool)
        pool.extend(row[1])
        pool.extend(row[2])
        return rel

    emit(BlockType.ATTRIBUTES, recovered.attributes, attr_pool,
         lambda base, rel, row: wire.AttributeEntry(row[0], len(row[1]), len(row[2]),
                                                    base + rel))

    def assoc_pool(pool, row):
        rel = len(pool)
        pool.extend(row[5])
        return rel

    emit(BlockType.ASSOCIATED_IMAGES, recovered.associated, assoc_pool,
         lambda base, rel, row: wire.AssociatedImageEntry(
             base + rel, len(row[5]), row[1], row[2], row[3], row[4], row[0]))

    def annot_pool(pool, row):
        rel = len(pool)
        pool.extend(row[1])
        return rel

    emit(BlockType.ANNOTATIONS, recovered.annotations, annot_pool,
         lambda base, rel, row: wire.AnnotationEntry(
             row[0].identifier, row[0].annotation_type,
             row[0].x, row[0].y, row[0].width, row[0].height,
             row[0].raster_width, row[0].raster_height,
             base + rel, len(row[1]), row[0].parent_id))

    def group_pool(pool, row):
        rel = len(pool)
        pool.extend(row[0])
        pool.extend(b"".join(int(m).to_bytes(4, "little") for m in row[1]))
        return rel

    emit(BlockType.ANNOTATION_GROUPS, recovered.groups, group_pool,
         lambda base, rel, row: wire.AnnotationGroupEntry(
             base + rel, len(row[0]), len(row[1]), base + rel + len(row[0])))

    icc_offset = 0
    if recovered.icc:
        icc_offset = allocator.reserve(wire.FIXED_SIZES[BlockType.ICC_PROFILE]
                                       + len(recovered.icc))
        write_blob_block(sink, icc_offset, BlockType.ICC_PROFILE, recovered.icc,
                         content_hint=int(BlockType.ICC_PROFILE))

    return wire.ClinicalMetadata(
        attributes_offset=offsets.get(BlockType.ATTRIBUTES, 0),
        associated_images_offset=offsets.get(BlockType.ASSOCIATED_IMAGES, 0),
        icc_offset=icc_offset,
        annotations_offset=offsets.get(BlockType.ANNOTATIONS, 0),
        annotation_groups_offset=offsets.get(BlockType.ANNOTATION_GROUPS, 0),
    )


def repair(source, output_path) -> SalvageReport:
    """One-call pipeline: open a damaged file, scan, rebuild, salvage."""
    view = source if isinstance(source, FileView) else open_view(source)
    owned = view is not source
    try:
        candidates = scan_candidates(view)
        if not candidates:
            raise UnrecoverableError("no block signatures found in the stream")
        recovered = rebuild(view, candidates)
        return salvage(view, recovered, output_path)
    finally:
        if owned:
            view.close()
