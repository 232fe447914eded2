"""Tile pixel buffers and the pluggable codec registry.

The container stores compressed tile byte streams and records which
codec produced them; decoding is dispatched through a registry so image
codecs stay swappable plug-ins. RAW_TEST (verbatim pixels) is always
registered and is the only codec the format tests depend on. JPEG and
AVIF are registered when Pillow is available. IRIS_CODEC is a reserved
format constant: files using it are structurally valid but cannot be
decoded by this implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CodecUnavailableError, DecodeError, EncodeError
from .wire import TILE_DIMENSION, EncodingFormat, PixelFormat


@dataclass(frozen=True)
class PixelBuffer:
    """Decompressed image data, row-major and tightly packed."""

    width: int
    height: int
    pixel_format: PixelFormat
    data: bytes

    def __post_init__(self):
        expected = self.width * self.height * self.pixel_format.bytes_per_pixel
        if len(self.data) != expected:
            raise ValueError(f"{self.width}x{self.height} "
                             f"{self.pixel_format.name} buffer needs {expected} bytes, "
                             f"got {len(self.data)}")

    @property
    def channels(self) -> int:
        return self.pixel_format.bytes_per_pixel

    def to_array(self) -> np.ndarray:
        """(height, width, channels) uint8 view of the pixel bytes."""
        return np.frombuffer(self.data, np.uint8).reshape(
            self.height, self.width, self.channels)

    @classmethod
    def from_array(cls, array: np.ndarray, pixel_format: PixelFormat) -> "PixelBuffer":
        array = np.ascontiguousarray(array, dtype=np.uint8)
        if array.ndim != 3 or array.shape[2] != pixel_format.bytes_per_pixel:
            raise ValueError(f"array shape {array.shape} does not match "
                             f"{pixel_format.name}")
        return cls(array.shape[1], array.shape[0], pixel_format, array.tobytes())


class RawCodec:
    """Verbatim pixels; exact round trip, no third-party dependency."""

    format = EncodingFormat.RAW_TEST

    def encode(self, buffer: PixelBuffer, quality: int | None = None) -> bytes:
        return buffer.data

    def decode(self, data, pixel_format: PixelFormat,
               width: int = TILE_DIMENSION, height: int = TILE_DIMENSION) -> PixelBuffer:
        expected = width * height * pixel_format.bytes_per_pixel
        if len(data) != expected:
            raise DecodeError(f"raw payload is {len(data)} bytes, {width}x{height} "
                              f"{pixel_format.name} needs {expected}")
        return PixelBuffer(width, height, pixel_format, bytes(data))


class _PillowCodec:
    """Shared encode/decode plumbing for Pillow-backed formats."""

    format: EncodingFormat
    pil_name: str

    def _modes(self, pixel_format: PixelFormat) -> str:
        return "RGB" if pixel_format is PixelFormat.R8G8B8 else "RGBA"

    def encode(self, buffer: PixelBuffer, quality: int | None = None) -> bytes:
        import io

        from PIL import Image

        mode = self._modes(buffer.pixel_format)
        if self.pil_name == "JPEG" and mode != "RGB":
            raise EncodeError("JPEG tiles support R8G8B8 only")
        image = Image.frombytes(mode, (buffer.width, buffer.height), buffer.data)
        out = io.BytesIO()
        params = {} if quality is None else {"quality": int(quality)}
        image.save(out, self.pil_name, **params)
        return out.getvalue()

    def decode(self, data, pixel_format: PixelFormat,
               width: int = TILE_DIMENSION, height: int = TILE_DIMENSION) -> PixelBuffer:
        import io

        from PIL import Image

        try:
            image = Image.open(io.BytesIO(data))
            image = image.convert(self._modes(pixel_format))
        except Exception as exc:
            raise DecodeError(f"{self.pil_name} payload could not be decoded: {exc}") from exc
        if image.size != (width, height):
            raise DecodeError(f"{self.pil_name} payload decodes to "
                              f"{image.size[0]}x{image.size[1]}, declared {width}x{height}")
        return PixelBuffer(width, height, pixel_format, image.tobytes())


class JpegCodec(_PillowCodec):
    format = EncodingFormat.JPEG
    pil_name = "JPEG"


class AvifCodec(_PillowCodec):
    format = EncodingFormat.AVIF
    pil_name = "AVIF"


class CodecRegistry:
    """Maps encoding formats to codec objects; RAW_TEST is always present."""

    def __init__(self):
        self._codecs = {}
        self.register(RawCodec())

    def register(self, codec) -> None:
        self._codecs[EncodingFormat(codec.format)] = codec

    def get(self, encoding_format: int):
        try:
            fmt = EncodingFormat(encoding_format)
        except ValueError:
            raise CodecUnavailableError(
                f"no codec registered for encoding format {encoding_format:#06x}")
        if fmt is EncodingFormat.IRIS_CODEC:
            raise CodecUnavailableError(
                "IRIS_CODEC is a reserved format; no codec is available")
        codec = self._codecs.get(fmt)
        if codec is None:
            raise CodecUnavailableError(f"no codec registered for {fmt.name}")
        return codec

    def supports(self, encoding_format: int) -> bool:
        try:
            self.get(encoding_format)
            return True
        except CodecUnavailableError:
            return False


def default_registry() -> CodecRegistry:
    """Registry with RAW_TEST plus whatever Pillow provides."""
    registry = CodecRegistry()
    try:
        from PIL import features
    except ImportError:
        return registry
    if features.check("jpg"):
        registry.register(JpegCodec())
    if features.check("avif"):
        registry.register(AvifCodec())
    return registry
