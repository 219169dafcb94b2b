"""Binary masks, PGM/PNG I/O and elementary raster operations.

Coordinates follow the raster convention: origin at the top-left pixel,
x to the right, y downward. Pixel ``(x, y)`` has its centre at ``(x, y)``.
"""

from __future__ import annotations

import io
from typing import NamedTuple

import numpy as np

from .errors import MaskFormatError, UnsupportedFormatError

DEFAULT_THRESHOLD = 128

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_WHITESPACE = b" \t\n\r\v\f"


class Point(NamedTuple):
    x: float
    y: float


class BinaryMask:
    """Immutable foreground/background grid.

    ``pixels`` is a read-only boolean array of shape ``(height, width)``.
    """

    __slots__ = ("_pixels",)

    def __init__(self, pixels):
        arr = np.array(pixels, dtype=bool, copy=True)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ValueError(f"mask must be a non-empty 2-D grid, got shape {arr.shape}")
        arr.flags.writeable = False
        self._pixels = arr

    @classmethod
    def blank(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))

    @property
    def pixels(self) -> np.ndarray:
        return self._pixels

    @property
    def width(self) -> int:
        return self._pixels.shape[1]

    @property
    def height(self) -> int:
        return self._pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self._pixels.shape

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._pixels, other._pixels))

    def __hash__(self):
        return hash((self.shape, self._pixels.tobytes()))

    def __repr__(self):
        return f"BinaryMask({self.width}x{self.height}, foreground={foreground_count(self)})"

    def as_float(self) -> np.ndarray:
        """Foreground 1.0, background 0.0."""
        return self._pixels.astype(np.float64)

    def translated(self, dx: int, dy: int) -> "BinaryMask":
        """Shift content by ``(dx, dy)``; pixels shifted off the canvas are dropped."""
        out = np.zeros_like(self._pixels)
        h, w = self.shape
        src = self._pixels[max(0, -dy):h - max(0, dy), max(0, -dx):w - max(0, dx)]
        out[max(0, dy):max(0, dy) + src.shape[0], max(0, dx):max(0, dx) + src.shape[1]] = src
        return BinaryMask(out)

    def mirrored(self) -> "BinaryMask":
        """Horizontal mirror (left-right flip)."""
        return BinaryMask(self._pixels[:, ::-1])


def foreground_count(mask: BinaryMask) -> int:
    return int(np.count_nonzero(mask.pixels))


def load_mask(data: bytes, threshold: int = DEFAULT_THRESHOLD) -> BinaryMask:
    """Decode a P5 PGM or 8-bit grayscale PNG and binarize it.

    A pixel is foreground iff its intensity is ``>= threshold``.
    """
    if not 0 <= threshold <= 255:
        raise ValueError(f"threshold must be in [0, 255], got {threshold}")
    if data.startswith(_PNG_SIGNATURE):
        values = _decode_png(data)
    elif data[:2] == b"P5":
        values = _decode_pgm(data)
    else:
        raise MaskFormatError("unrecognised image signature, expected P5 PGM or PNG", 0)
    return BinaryMask(values >= threshold)


def read_mask(path, threshold: int = DEFAULT_THRESHOLD) -> BinaryMask:
    with open(path, "rb") as fh:
        return load_mask(fh.read(), threshold)


def save_mask(mask: BinaryMask) -> bytes:
    """Encode as P5 PGM, foreground 255 and background 0."""
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    return header + (mask.pixels.astype(np.uint8) * 255).tobytes()


def write_mask(path, mask: BinaryMask) -> None:
    with open(path, "wb") as fh:
        fh.write(save_mask(mask))


def _decode_pgm(data: bytes) -> np.ndarray:
    pos = 2
    fields = []
    while len(fields) < 3:
        # Whitespace and '#' comments may separate header fields.
        while pos < len(data) and (data[pos] in _WHITESPACE or data[pos] == ord("#")):
            if data[pos] == ord("#"):
                while pos < len(data) and data[pos] not in b"\r\n":
                    pos += 1
            else:
                pos += 1
        start = pos
        while pos < len(data) and data[pos] not in _WHITESPACE and data[pos] != ord("#"):
            pos += 1
        token = data[start:pos]
        if not token:
            raise MaskFormatError("truncated PGM header", start)
        if not token.isdigit():
            raise MaskFormatError(f"non-numeric PGM header field {token[:16]!r}", start)
        fields.append((int(token), start))
    (width, woff), (height, hoff), (maxval, moff) = fields
    if width <= 0:
        raise MaskFormatError("PGM width must be positive", woff)
    if height <= 0:
        raise MaskFormatError("PGM height must be positive", hoff)
    if not 0 < maxval <= 255:
        raise MaskFormatError(f"only 8-bit PGM is supported, maxval {maxval}", moff)
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise MaskFormatError("missing whitespace after PGM maxval", pos)
    pos += 1
    expected = width * height
    raster = data[pos:pos + expected]
    if len(raster) < expected:
        raise MaskFormatError(
            f"PGM raster truncated: expected {expected} bytes, found {len(raster)}",
            pos + len(raster),
        )
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width)


def _decode_png(data: bytes) -> np.ndarray:
    from PIL import Image, UnidentifiedImageError

    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise MaskFormatError(f"malformed PNG: {exc}", len(_PNG_SIGNATURE)) from exc
    if img.mode == "1":
        img = img.convert("L")
    if img.mode != "L":
        raise UnsupportedFormatError(
            f"PNG mode {img.mode!r} is not supported; expected 8-bit single-channel grayscale"
        )
    return np.asarray(img, dtype=np.uint8)
