"""Grayscale raster type and image file I/O.

Intensities are stored as real numbers on a 0-255 scale throughout the
pipeline; quantization to 8 bits happens only when reading or writing files.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

__all__ = [
    "GrayImage",
    "PsnrValue",
    "quantize",
    "load_image",
    "save_pgm",
    "save_png",
]


def quantize(values: np.ndarray) -> np.ndarray:
    """Round half-up to the nearest integer and clamp to the 8-bit range."""
    return np.clip(np.floor(np.asarray(values, dtype=np.float64) + 0.5), 0, 255).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Immutable 2-D grayscale raster.

    `pixels` is a read-only float64 array of shape (height, width) with every
    intensity in [0, 255].
    """

    pixels: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.pixels, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"expected a non-empty 2-D raster, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("intensities must be finite")
        if float(arr.min()) < 0.0 or float(arr.max()) > 255.0:
            raise ValueError("intensities must lie in [0, 255]")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def same_shape(self, other: "GrayImage") -> bool:
        return self.pixels.shape == other.pixels.shape


@dataclass(frozen=True)
class PsnrValue:
    """PSNR in decibels, or not-applicable when the compared images are identical."""

    db: float | None

    @property
    def finite(self) -> bool:
        return self.db is not None

    @classmethod
    def not_applicable(cls) -> "PsnrValue":
        return cls(db=None)


# Luminance weights for color conversion (ITU-R BT.601).
_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def _decode_pgm(data: bytes) -> np.ndarray:
    """Decode a binary PGM (P5) file into a float64 raster."""
    if not data.startswith(b"P5"):
        raise ValueError("not a binary PGM (P5) file")
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos : pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise ValueError("malformed PGM header")
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = fields
    if maxval > 255:
        raise ValueError(f"only 8-bit PGM supported (maxval {maxval})")
    raster = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    if raster.size != width * height:
        raise ValueError("truncated PGM raster")
    return raster.reshape(height, width).astype(np.float64)


def load_image(path: str | Path) -> GrayImage:
    """Load a PNG or binary PGM file as a grayscale image.

    Color inputs are converted by luminance Y = 0.299R + 0.587G + 0.114B,
    rounded half-up.
    """
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return GrayImage(_decode_pgm(path.read_bytes()))
    with Image.open(path) as im:
        if im.mode == "L":
            arr = np.asarray(im, dtype=np.float64)
        else:
            rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
            arr = np.clip(np.floor(rgb @ _LUMA_WEIGHTS + 0.5), 0, 255)
    return GrayImage(arr)


def save_pgm(img: GrayImage, path: str | Path) -> None:
    """Write the image as a binary PGM (P5) file, quantizing to 8 bits."""
    raster = quantize(img.pixels)
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + raster.tobytes())


def save_png(img: GrayImage, path: str | Path) -> None:
    """Write the image as an 8-bit grayscale PNG."""
    Image.fromarray(quantize(img.pixels), mode="L").save(path, format="PNG")
