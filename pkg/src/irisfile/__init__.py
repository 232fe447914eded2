"""Binary whole-slide-image container toolkit.

The container stores a tiled multi-resolution pyramid plus optional
clinical metadata as offset-chained, self-validating data-blocks:
every block encodes its own byte offset and a typed recovery tag, so
files can be deeply validated in microseconds and rebuilt after
corruption. Tile payload placement is free, which lets any number of
encoder threads write simultaneously through one atomic reservation
counter.

Typical use::

    from irisfile import encode_slide, open_slide, synthetic_source

    source = synthetic_source(seed=7, layer_specs=[(1, 1), (2, 2), (4, 4)])
    encode_slide(source, sink="slide.iris")

    with open_slide("slide.iris") as slide:
        pixels = slide.read_tile(0)
"""

from .bench import BenchResult, bench_random_access, format_report
from .codecs import (AvifCodec, CodecRegistry, JpegCodec, PixelBuffer, RawCodec,
                     default_registry)
from .encode import (AnnotationInput, AssociatedImageInput, AttributeInput,
                     EncodeParams, EncodeReport, GroupInput, PrecompressedSource,
                     PyramidSource, SlideSource, SyntheticSource, encode_slide,
                     synthetic_source)
from .errors import (CapacityError, CodecUnavailableError, DecodeError, EncodeError,
                     FormatError, IrisFileError, OpenError, UnrecoverableError)
from .reader import (SPARSE, ArrayView, FileView, open_view, read_array,
                     read_header_block, tile_record)
from .recovery import (CandidateBlock, RecoveredStructure, SalvageReport, rebuild,
                       repair, salvage, scan_candidates)
from .slide import (AnnotationGroup, Attribute, SlideHandle, SlideSpaceRect,
                    open_slide, to_view_pixels)
from .validation import (Finding, Severity, ValidationLevel, ValidationReport,
                         validate)
from .wire import (AnnotationEntry, AnnotationGroupEntry, AnnotationType,
                   AssociatedImageEntry, AttributeEntry, BlockPrefix, BlockType,
                   ClinicalMetadata, EncodingFormat, FileHeader, ImageLabel,
                   KeyFormat, LayerExtent, PixelFormat, PyramidLayout, TileOffsetEntry,
                   TileTable, get_scalar, make_recovery_tag, parse_recovery_tag,
                   put_scalar)
from .writer import (BufferSink, FileSink, ReservationAllocator, WriteReceipt,
                     finalize, write_array_block, write_blob_block, write_header_block,
                     write_tile_payload)

__version__ = "0.1.0"
