"""Image file decode/encode for PNG and binary PPM/PGM.

The decoder picks the format from the file's magic bytes, never from the
extension. Pillow does the actual pixel decoding; this module owns format
detection, the float conversion contract (8-bit sources map to 0..255,
16-bit sources are rescaled to the same range) and the error surface.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

from .errors import DecodeError
from .raster import ColorImage, GrayImage

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def sniff_format(path: str | os.PathLike) -> str:
    """Return 'png', 'pgm' or 'ppm' based on the file's leading bytes."""
    try:
        with open(path, "rb") as fh:
            head = fh.read(8)
    except OSError as exc:
        raise DecodeError(f"cannot read image file {path}: {exc}") from exc
    if head.startswith(_PNG_MAGIC):
        return "png"
    if head[:2] == b"P5" and len(head) > 2 and head[2:3].isspace():
        return "pgm"
    if head[:2] == b"P6" and len(head) > 2 and head[2:3].isspace():
        return "ppm"
    raise DecodeError(f"unsupported image format in {path} (magic bytes {head[:4]!r})")


def read_image(path: str | os.PathLike) -> GrayImage | ColorImage:
    """Decode a PNG/PGM/PPM file into a GrayImage or ColorImage.

    Single-band sources decode to GrayImage, everything else to ColorImage
    (palette and alpha images are flattened to RGB).
    """
    sniff_format(path)
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("1", "L", "I", "I;16"):
                arr = np.asarray(im, dtype=np.float64)
                if im.mode == "1":
                    arr = arr * 255.0
                elif im.mode in ("I", "I;16") and arr.size and arr.max() > 255:
                    arr = arr * (255.0 / 65535.0)
                return GrayImage(arr)
            rgb = im.convert("RGB")
            return ColorImage(np.asarray(rgb, dtype=np.float64))
    except DecodeError:
        raise
    except Exception as exc:
        raise DecodeError(f"failed to decode {path}: {exc}") from exc


def write_image(img: GrayImage | ColorImage, path: str | os.PathLike) -> None:
    """Encode to PNG, PGM or PPM, chosen by the output file extension.

    Pixel values are clipped to [0, 255] and rounded to 8 bits.
    """
    ext = os.path.splitext(os.fspath(path))[1].lower()
    data = np.clip(np.rint(img.pixels), 0, 255).astype(np.uint8)
    if isinstance(img, GrayImage):
        pil = Image.fromarray(data, mode="L")
        allowed = {".png", ".pgm"}
    else:
        pil = Image.fromarray(data, mode="RGB")
        allowed = {".png", ".ppm"}
    if ext not in allowed:
        raise DecodeError(
            f"cannot write {type(img).__name__} to '{ext or path}' "
            f"(supported: {', '.join(sorted(allowed))})"
        )
    pil.save(path)
