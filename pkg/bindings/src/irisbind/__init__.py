"""Scripting-friendly bindings over the irisfile container library.

This layer flattens the library's typed objects into plain Python
mappings, sequences and numpy arrays, for notebook and script use:

    import irisbind

    slide = irisbind.py_open("slide.iris")
    slide.layout           # [{'x_tiles': 1, 'y_tiles': 1, 'scale': 1.0}, ...]
    tile = irisbind.py_read_tile(slide, 0)   # ndarray (256, 256, channels)
    stats = irisbind.py_bench("slide.iris")  # same schema as the CLI bench

Bindings are read-only: encoding stays with the primary library. Errors
surface as builtin exceptions carrying the validation report text.
"""

from __future__ import annotations

import numpy as np

import irisfile as _ir

__all__ = ["BoundSlide", "py_open", "py_read_tile", "py_bench"]
__version__ = "0.1.0"


class BoundSlide:
    """Read-only slide wrapper exposing plain-Python views of metadata."""

    def __init__(self, handle: _ir.SlideHandle):
        self._handle = handle
        self.path = handle.view.origin
        self.layout = [
            {"x_tiles": e.x_tiles, "y_tiles": e.y_tiles, "scale": e.scale}
            for e in handle.layout.layers
        ]
        self.tile_count = handle.total_tiles
        self.sparse_count = handle.sparse_count
        self.tile_dimension = handle.tile_dimension
        self.encoding_format = _format_name(handle.encoding_format)
        self.pixel_format = handle.pixel_format.name
        self.channels = handle.pixel_format.bytes_per_pixel
        self.labels = list(handle.associated_image_labels)
        self.annotation_ids = list(handle.annotation_ids)
        self.group_names = list(handle.group_names)

    # -- mappings built on demand -------------------------------------------

    @property
    def attributes(self) -> dict:
        """Attribute mapping; values are str, or raw bytes when a value
        is not valid UTF-8."""
        return {a.key: (a.value if a.value is not None else a.raw_value)
                for a in self._handle.read_attributes()}

    @property
    def groups(self) -> dict:
        return {g.name: list(g.members)
                for g in self._handle.read_annotation_groups()}

    def annotation(self, identifier: int) -> dict:
        entry = self._handle.read_annotation(identifier)
        return {
            "identifier": entry.identifier,
            "type": _enum_name(_ir.AnnotationType, entry.annotation_type),
            "x": entry.x, "y": entry.y,
            "width": entry.width, "height": entry.height,
            "raster_width": entry.raster_width,
            "raster_height": entry.raster_height,
            "parent_id": entry.parent_id,
        }

    def annotation_payload(self, identifier: int) -> bytes:
        return self._handle.read_annotation_payload(identifier)

    def associated_image(self, label: str) -> np.ndarray:
        buffer, _ = self._handle.read_associated_image(label)
        return buffer.to_array()

    def icc_profile(self) -> bytes | None:
        return self._handle.read_icc_profile()

    def tile_bytes(self, index: int) -> bytes | None:
        """Verbatim compressed payload; None for a sparse tile."""
        data = self._handle.read_tile_compressed(index)
        return None if data is _ir.SPARSE else bytes(data)

    def close(self) -> None:
        self._handle.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __repr__(self):
        return (f"<BoundSlide {self.path!r}: {len(self.layout)} layers, "
                f"{self.tile_count} tiles, {self.encoding_format}>")


def _format_name(code: int) -> str:
    return _enum_name(_ir.EncodingFormat, code)


def _enum_name(enum_cls, code: int) -> str:
    try:
        return enum_cls(code).name
    except ValueError:
        return hex(code)


def py_open(path) -> BoundSlide:
    """Open and validate a slide; invalid files raise ValueError naming
    the first validation error."""
    try:
        return BoundSlide(_ir.open_slide(path))
    except _ir.OpenError as exc:
        raise ValueError(str(exc)) from exc


def py_read_tile(slide: BoundSlide, index: int) -> np.ndarray | None:
    """Decode one tile into a (dimension, dimension, channels) uint8
    array; None for a sparse tile."""
    buffer = slide._handle.read_tile(index)
    if buffer is _ir.SPARSE:
        return None
    return buffer.to_array()


def py_bench(path, batch: int = 10_000, batches: int = 3, seed: int = 0) -> dict:
    """Random-access benchmark; returns the same schema as the CLI bench
    --json output (per-batch tiles/sec, medians, TPT)."""
    with _ir.open_slide(path) as handle:
        result = _ir.bench_random_access(handle, batch_size=batch,
                                         batches=batches, seed=seed)
    return result.to_dict()
