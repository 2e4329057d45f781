"""Annotation schema, ingestion, night-based splits and dataset statistics.

The canonical annotation file is a JSON object with an ``images`` list and
a ``boxes`` list. Every box names its image, boxes must fit the declared
image dimensions, and image ids are unique. Nights are calendar dates (the
evening a capture session started), which is what the split logic keys on.
"""

from __future__ import annotations

import datetime as dt
import json
import os
from dataclasses import dataclass, replace

import numpy as np

from .errors import InputError
from .raster import Box, Detection

QUANTILES = (5, 25, 50, 75, 95)


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    file_path: str
    width: int
    height: int
    night: dt.date | None = None
    split: str | None = None

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InputError(f"image {self.image_id}: dimensions must be >= 1")
        if self.split not in (None, "train", "test"):
            raise InputError(f"image {self.image_id}: split must be train, test or null")


@dataclass(frozen=True)
class BoxRecord:
    image_id: str
    box: Box
    species: str | None = None


@dataclass(frozen=True)
class AnnotationFile:
    images: tuple[ImageRecord, ...]
    boxes: tuple[BoxRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "images", tuple(self.images))
        object.__setattr__(self, "boxes", tuple(self.boxes))
        by_id: dict[str, ImageRecord] = {}
        for rec in self.images:
            if rec.image_id in by_id:
                raise InputError(f"duplicate image_id {rec.image_id!r}")
            by_id[rec.image_id] = rec
        for b in self.boxes:
            img = by_id.get(b.image_id)
            if img is None:
                raise InputError(f"box references missing image_id {b.image_id!r}")
            if not b.box.fits_in(img.width, img.height):
                raise InputError(
                    f"box ({b.box.x},{b.box.y},{b.box.w},{b.box.h}) exceeds the "
                    f"{img.width}x{img.height} bounds of image {b.image_id!r}"
                )

    def image_ids(self) -> list[str]:
        return [rec.image_id for rec in self.images]


@dataclass(frozen=True)
class SplitSpec:
    mode: str  # by_night | by_flag
    train_nights: tuple[dt.date, ...] = ()

    def __post_init__(self):
        if self.mode not in ("by_night", "by_flag"):
            raise InputError(f"split mode must be by_night or by_flag, got {self.mode!r}")
        object.__setattr__(self, "train_nights", tuple(self.train_nights))
        if self.mode == "by_night" and not self.train_nights:
            raise InputError("by_night split needs a non-empty train_nights list")


def _parse_night(value, where: str) -> dt.date | None:
    if value is None:
        return None
    try:
        return dt.date.fromisoformat(value)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{where}: night must be an ISO date or null, got {value!r}") from exc


def _require(record: dict, key: str, where: str):
    if key not in record:
        raise InputError(f"{where}: missing required field {key!r}")
    return record[key]


def parse_annotations(doc, *, where: str = "annotations") -> AnnotationFile:
    """Validate a decoded annotation JSON document."""
    if not isinstance(doc, dict) or not isinstance(doc.get("images"), list) \
            or not isinstance(doc.get("boxes"), list):
        raise InputError(f"{where}: expected an object with 'images' and 'boxes' lists")
    images = []
    for n, rec in enumerate(doc["images"]):
        ctx = f"{where}: images[{n}]"
        if not isinstance(rec, dict):
            raise InputError(f"{ctx}: expected an object")
        images.append(
            ImageRecord(
                image_id=str(_require(rec, "image_id", ctx)),
                file_path=str(_require(rec, "file_path", ctx)),
                width=int(_require(rec, "width", ctx)),
                height=int(_require(rec, "height", ctx)),
                night=_parse_night(rec.get("night"), ctx),
                split=rec.get("split"),
            )
        )
    boxes = []
    for n, rec in enumerate(doc["boxes"]):
        ctx = f"{where}: boxes[{n}]"
        if not isinstance(rec, dict):
            raise InputError(f"{ctx}: expected an object")
        try:
            box = Box(
                int(_require(rec, "x", ctx)), int(_require(rec, "y", ctx)),
                int(_require(rec, "w", ctx)), int(_require(rec, "h", ctx)),
            )
        except InputError as exc:
            raise InputError(f"{ctx}: {exc}") from exc
        species = rec.get("species")
        boxes.append(BoxRecord(str(_require(rec, "image_id", ctx)), box,
                               None if species is None else str(species)))
    return AnnotationFile(tuple(images), tuple(boxes))


def load_annotations(path: str | os.PathLike) -> AnnotationFile:
    """Load and validate an annotation JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read annotations {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc
    return parse_annotations(doc, where=os.fspath(path))


def resolve_path(annotation_path: str | os.PathLike, file_path: str) -> str:
    """Resolve an image path relative to its annotation file's directory."""
    if os.path.isabs(file_path):
        return file_path
    return os.path.join(os.path.dirname(os.fspath(annotation_path)), file_path)


def parse_predictions(doc, *, where: str = "predictions") -> tuple[AnnotationFile, dict[str, list[Detection]]]:
    """Validate a predictions document: the annotation schema plus a score per box.

    Returns the structural annotation view and a per-image detection map
    that covers every listed image (zero-detection images get empty lists).
    """
    ann = parse_annotations(doc, where=where)
    preds: dict[str, list[Detection]] = {rec.image_id: [] for rec in ann.images}
    for n, rec in enumerate(doc["boxes"]):
        ctx = f"{where}: boxes[{n}]"
        if "score" not in rec:
            raise InputError(f"{ctx}: missing required field 'score'")
        try:
            score = float(rec["score"])
        except (TypeError, ValueError) as exc:
            raise InputError(f"{ctx}: score must be a number, got {rec['score']!r}") from exc
        try:
            det = Detection(ann.boxes[n].box, score)
        except InputError as exc:
            raise InputError(f"{ctx}: {exc}") from exc
        preds[ann.boxes[n].image_id].append(det)
    return ann, preds


def load_predictions(path: str | os.PathLike) -> tuple[AnnotationFile, dict[str, list[Detection]]]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read predictions {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc
    return parse_predictions(doc, where=os.fspath(path))


def predictions_to_doc(images: list[ImageRecord], preds: dict[str, list[Detection]]) -> dict:
    doc = annotations_to_doc(AnnotationFile(tuple(images), ()))
    doc["boxes"] = [
        {
            "image_id": rec.image_id,
            "x": d.box.x,
            "y": d.box.y,
            "w": d.box.w,
            "h": d.box.h,
            "score": d.score,
            "species": None,
        }
        for rec in images
        for d in preds.get(rec.image_id, [])
    ]
    return doc


def annotations_to_doc(a: AnnotationFile) -> dict:
    return {
        "images": [
            {
                "image_id": r.image_id,
                "file_path": r.file_path,
                "width": r.width,
                "height": r.height,
                "night": r.night.isoformat() if r.night else None,
                "split": r.split,
            }
            for r in a.images
        ],
        "boxes": [
            {
                "image_id": b.image_id,
                "x": b.box.x,
                "y": b.box.y,
                "w": b.box.w,
                "h": b.box.h,
                "species": b.species,
            }
            for b in a.boxes
        ],
    }


def save_annotations(a: AnnotationFile, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(annotations_to_doc(a), fh, indent=2)
        fh.write("\n")


def split(a: AnnotationFile, s: SplitSpec) -> tuple[AnnotationFile, AnnotationFile]:
    """Partition into (train, test); boxes follow their images.

    by_night puts images whose night is listed in train_nights on the
    train side and everything else on the test side; by_flag uses the
    stored split field. Both modes require the relevant field on every
    image.
    """
    train_ids = set()
    if s.mode == "by_night":
        nights = set(s.train_nights)
        for rec in a.images:
            if rec.night is None:
                raise InputError(f"image {rec.image_id!r} has no night; by_night split needs one")
            if rec.night in nights:
                train_ids.add(rec.image_id)
    else:
        for rec in a.images:
            if rec.split is None:
                raise InputError(f"image {rec.image_id!r} has no split flag; by_flag split needs one")
            if rec.split == "train":
                train_ids.add(rec.image_id)
    train = AnnotationFile(
        tuple(r for r in a.images if r.image_id in train_ids),
        tuple(b for b in a.boxes if b.image_id in train_ids),
    )
    test = AnnotationFile(
        tuple(r for r in a.images if r.image_id not in train_ids),
        tuple(b for b in a.boxes if b.image_id not in train_ids),
    )
    return train, test


def stats(a: AnnotationFile) -> dict:
    """Counts, boxes-per-image histogram and box-area quantiles.

    The histogram maps a per-image box count to the number of images with
    that count; quantiles are at the 5/25/50/75/95 percent marks and all
    zeros for an empty dataset.
    """
    per_image = {rec.image_id: 0 for rec in a.images}
    for b in a.boxes:
        per_image[b.image_id] += 1
    histogram: dict[int, int] = {}
    for count in per_image.values():
        histogram[count] = histogram.get(count, 0) + 1
    areas = [b.box.area for b in a.boxes]
    if areas:
        qs = np.percentile(np.asarray(areas, dtype=np.float64), QUANTILES)
        quantiles = {q: float(v) for q, v in zip(QUANTILES, qs)}
    else:
        quantiles = {q: 0.0 for q in QUANTILES}
    species = {b.species for b in a.boxes if b.species is not None}
    return {
        "n_images": len(a.images),
        "n_boxes": len(a.boxes),
        "n_species": len(species),
        "boxes_per_image": dict(sorted(histogram.items())),
        "box_area_quantiles": quantiles,
    }
