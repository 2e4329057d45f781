"""Image and geometry primitives shared by every pipeline stage.

Images store pixel intensities as float64 regardless of the source bit
depth (8-bit sources decode to 0..255); boxes use integer pixel counts so
areas are exact. All types are immutable after construction: the backing
arrays are marked read-only, and every operation returns a new value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError


def _frozen_array(values, dtype, ndim: int, what: str) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=dtype)
    if arr.ndim != ndim:
        raise InputError(f"{what}: expected {ndim}-d pixel data, got shape {arr.shape}")
    if arr.dtype.kind == "f" and not np.isfinite(arr).all():
        raise InputError(f"{what}: pixel values must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Single-channel raster; ``pixels`` is a read-only (height, width) float64 array."""

    pixels: np.ndarray = field()

    def __post_init__(self):
        arr = _frozen_array(self.pixels, np.float64, 2, "GrayImage")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InputError("GrayImage: width and height must be >= 1")
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class ColorImage:
    """RGB raster; ``pixels`` is a read-only (height, width, 3) float64 array."""

    pixels: np.ndarray = field()

    def __post_init__(self):
        arr = _frozen_array(self.pixels, np.float64, 3, "ColorImage")
        if arr.shape[2] != 3:
            raise InputError(f"ColorImage: expected 3 channels, got {arr.shape[2]}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InputError("ColorImage: width and height must be >= 1")
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class BinaryImage:
    """Foreground mask; ``mask`` is a read-only (height, width) bool array."""

    mask: np.ndarray = field()

    def __post_init__(self):
        arr = np.asarray(self.mask)
        if arr.dtype != np.bool_:
            raise InputError(f"BinaryImage: mask must be bool, got dtype {arr.dtype}")
        arr = np.ascontiguousarray(arr)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InputError(f"BinaryImage: expected 2-d mask, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "mask", arr)

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def height(self) -> int:
        return self.mask.shape[0]


@dataclass(frozen=True, order=True)
class Box:
    """Axis-aligned pixel rectangle: left x, top y, width and height in pixels."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)):
                raise InputError(f"Box.{name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.w < 1 or self.h < 1:
            raise InputError(f"Box width/height must be >= 1, got {self.w}x{self.h}")
        if self.x < 0 or self.y < 0:
            raise InputError(f"Box origin must be non-negative, got ({self.x}, {self.y})")

    @property
    def area(self) -> int:
        return self.w * self.h

    def fits_in(self, width: int, height: int) -> bool:
        return self.x + self.w <= width and self.y + self.h <= height


@dataclass(frozen=True)
class Detection:
    """A box with a confidence score in [0, 1] and an optional class label."""

    box: Box
    score: float
    label: str | None = None

    def __post_init__(self):
        s = float(self.score)
        if not (0.0 <= s <= 1.0):
            raise InputError(f"Detection score must be in [0, 1], got {s}")
        object.__setattr__(self, "score", s)


def to_grayscale(img: ColorImage) -> GrayImage:
    """Convert RGB to luma using the standard 0.299/0.587/0.114 weights."""
    weights = np.array([0.299, 0.587, 0.114])
    return GrayImage(img.pixels @ weights)


def crop(img: GrayImage | ColorImage, box: Box):
    """Extract the pixels covered by ``box``; returns the same image kind.

    Raises InputError when the box reaches outside the image.
    """
    if not box.fits_in(img.width, img.height):
        raise InputError(
            f"crop box ({box.x},{box.y},{box.w},{box.h}) exceeds "
            f"{img.width}x{img.height} image bounds"
        )
    patch = img.pixels[box.y : box.y + box.h, box.x : box.x + box.w].copy()
    return type(img)(patch)


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes with pixel-area semantics."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union
