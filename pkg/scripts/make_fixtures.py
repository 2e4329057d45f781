#!/usr/bin/env python3
"""Regenerate the committed test fixtures under tests/fixtures/.

Deterministic by construction; re-running must reproduce the exact same
files, and the tests hard-code the counts authored here.
"""

from __future__ import annotations

import json
import os

import numpy as np

from mothscan.raster import ColorImage, GrayImage
from mothscan.imgio import write_image

HERE = os.path.dirname(os.path.abspath(__file__))
FIXTURES = os.path.join(HERE, "..", "tests", "fixtures")


def eu_moths_style() -> dict:
    """Six studio-style images, seven boxes, three species, split flags."""
    images = [
        {"image_id": f"eu{i:02d}", "file_path": f"images/eu{i:02d}.png",
         "width": 640, "height": 480, "night": None,
         "split": "train" if i < 4 else "test"}
        for i in range(6)
    ]
    boxes = [
        {"image_id": "eu00", "x": 100, "y": 80, "w": 120, "h": 90, "species": "noctua_pronuba"},
        {"image_id": "eu01", "x": 220, "y": 140, "w": 60, "h": 40, "species": "catocala_nupta"},
        {"image_id": "eu02", "x": 10, "y": 10, "w": 200, "h": 150, "species": "noctua_pronuba"},
        {"image_id": "eu03", "x": 300, "y": 200, "w": 90, "h": 120, "species": "agrotis_exclamationis"},
        {"image_id": "eu03", "x": 60, "y": 50, "w": 45, "h": 30, "species": "catocala_nupta"},
        {"image_id": "eu04", "x": 400, "y": 300, "w": 150, "h": 100, "species": "noctua_pronuba"},
        {"image_id": "eu04", "x": 20, "y": 350, "w": 80, "h": 64, "species": "agrotis_exclamationis"},
    ]
    return {"images": images, "boxes": boxes}


def nid_style() -> dict:
    """Twenty field images over ten nights, unlabeled boxes, no split flags."""
    images = []
    boxes = []
    rng = np.random.default_rng(2023)
    for night_i in range(10):
        night = f"2023-07-{night_i + 1:02d}"
        for j in range(2):
            image_id = f"n{night_i:02d}_{j}"
            images.append(
                {"image_id": image_id, "file_path": f"frames/{image_id}.png",
                 "width": 800, "height": 600, "night": night, "split": None}
            )
            for _ in range(int(rng.integers(0, 4))):
                w = int(rng.integers(20, 80))
                h = int(rng.integers(20, 80))
                x = int(rng.integers(0, 800 - w))
                y = int(rng.integers(0, 600 - h))
                boxes.append({"image_id": image_id, "x": x, "y": y, "w": w, "h": h,
                              "species": None})
    return {"images": images, "boxes": boxes}


def two_blob_image(size: int = 64) -> GrayImage:
    """White field with two dark disks; detectable with small-image settings."""
    px = np.full((size, size), 255.0)
    for cx, cy, r in ((18, 20, 7), (46, 42, 9)):
        ys, xs = np.mgrid[0:size, 0:size]
        px[(ys - cy) ** 2 + (xs - cx) ** 2 <= r * r] = 60.0
    return GrayImage(px)


def color_blob_image(size: int = 48) -> ColorImage:
    px = np.full((size, size, 3), 255.0)
    ys, xs = np.mgrid[0:size, 0:size]
    px[(ys - 24) ** 2 + (xs - 24) ** 2 <= 81] = (120.0, 40.0, 40.0)
    return ColorImage(px)


def main() -> None:
    os.makedirs(FIXTURES, exist_ok=True)
    for name, doc in (("eu_moths_style.json", eu_moths_style()),
                      ("nid_style.json", nid_style())):
        with open(os.path.join(FIXTURES, name), "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    write_image(two_blob_image(), os.path.join(FIXTURES, "two_blobs.png"))
    write_image(GrayImage(np.full((32, 32), 255.0)), os.path.join(FIXTURES, "blank.png"))
    write_image(color_blob_image(), os.path.join(FIXTURES, "color_blob.png"))
    print(f"fixtures written to {os.path.normpath(FIXTURES)}")


if __name__ == "__main__":
    main()
