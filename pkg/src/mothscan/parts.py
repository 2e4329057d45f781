"""Unsupervised part estimation from feature-gradient saliency maps.

Gradient maps arrive as files (the CNN that produces them is a separate
system). They are averaged in absolute value into a saliency map, the map
is normalized and sparsified at its mean, peak locations seed a k-means
clustering of per-pixel features (position, saliency and optionally RGB,
all rescaled to [0, 1]), and each resulting cluster yields one part box.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .raster import Box, ColorImage

_RASTER_HEADER = struct.Struct("<II")  # width, height


@dataclass(frozen=True, eq=False)
class SaliencyMap:
    """Non-negative scalar field over an image; values is (height, width) float64."""

    values: np.ndarray = field()

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InputError(f"SaliencyMap: expected 2-d values, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise InputError("SaliencyMap: values must be finite")
        if (arr < 0).any():
            raise InputError("SaliencyMap: values must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class GradientMapSet:
    """Per-feature-dimension gradient magnitudes, one 2-d map per dimension."""

    dims: tuple[int, ...]
    maps: np.ndarray = field()  # (n, height, width)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) < 1:
            raise InputError("GradientMapSet needs at least one dimension")
        if len(set(dims)) != len(dims):
            raise InputError("GradientMapSet dimension indices must be unique")
        arr = np.ascontiguousarray(self.maps, dtype=np.float64)
        if arr.ndim != 3:
            raise InputError(f"GradientMapSet maps must be (n, h, w), got shape {arr.shape}")
        if arr.shape[0] != len(dims):
            raise InputError(
                f"GradientMapSet has {len(dims)} dims but {arr.shape[0]} maps"
            )
        if not np.isfinite(arr).all():
            raise InputError("GradientMapSet: values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "maps", arr)


@dataclass(frozen=True, eq=False)
class FeatureWeights:
    """Weight matrix of a linear classifier: one row per class, one column per feature."""

    weights: np.ndarray = field()  # (classes, dim)

    def __post_init__(self):
        arr = np.ascontiguousarray(self.weights, dtype=np.float64)
        if arr.ndim != 2:
            raise InputError(f"FeatureWeights must be 2-d, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise InputError("FeatureWeights entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "weights", arr)

    @property
    def classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class PartConfig:
    k: int = 4
    peak_min_distance: float = 10.0
    use_rgb: bool = True
    max_iters: int = 100
    tol: float = 1e-4

    def __post_init__(self):
        if self.k < 1:
            raise InputError("k must be >= 1")
        if self.max_iters < 1:
            raise InputError("max_iters must be >= 1")
        if self.tol <= 0:
            raise InputError("tol must be > 0")
        if self.peak_min_distance < 0:
            raise InputError("peak_min_distance must be >= 0")


@dataclass(frozen=True, eq=False)
class PartEstimate:
    """Full output of part estimation, for callers that need the clustering itself."""

    boxes: list[Box]
    assignments: np.ndarray  # cluster index per clustered pixel
    coords: np.ndarray  # (n, 2) integer (x, y) of the clustered pixels
    centroids: np.ndarray
    objective_history: list[float]


def select_feature_dims(w: FeatureWeights, threshold: float) -> list[int]:
    """Feature dimensions where any class weight exceeds the threshold in magnitude."""
    if threshold < 0:
        raise InputError("threshold must be >= 0")
    hit = (np.abs(w.weights) > threshold).any(axis=0)
    return [int(d) for d in np.flatnonzero(hit)]


def saliency_from_gradmaps(g: GradientMapSet) -> SaliencyMap:
    """Per-pixel mean of the absolute gradient maps."""
    return SaliencyMap(np.abs(g.maps).mean(axis=0))


def sparsify_saliency(m: SaliencyMap) -> SaliencyMap:
    """Min-max normalize to [0, 1], then zero everything below the mean.

    A constant map normalizes to all zeros. Values exactly at the mean of
    the normalized map survive.
    """
    v = m.values
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        return SaliencyMap(np.zeros_like(v))
    norm = (v - lo) / (hi - lo)
    norm[norm < norm.mean()] = 0.0
    return SaliencyMap(norm)


def find_peaks(m: SaliencyMap, k: int, min_distance: float) -> list[tuple[int, int]]:
    """Up to k greedily chosen (x, y) maxima, pairwise more than min_distance apart.

    Only strictly positive pixels are candidates. Ties between equal
    values resolve in (y, x) order, and the greedy pass stops once no
    candidate lies farther than min_distance from every chosen peak.
    """
    if k < 1:
        raise InputError("k must be >= 1")
    v = m.values
    ys, xs = np.nonzero(v > 0)
    if ys.size == 0:
        return []
    vals = v[ys, xs]
    order = np.lexsort((xs, ys, -vals))
    peaks: list[tuple[int, int]] = []
    min_sq = min_distance * min_distance
    for i in order:
        x, y = int(xs[i]), int(ys[i])
        if all((x - px) ** 2 + (y - py) ** 2 > min_sq for px, py in peaks):
            peaks.append((x, y))
            if len(peaks) == k:
                break
    return peaks


def lloyd_kmeans(
    features: np.ndarray, centroids: np.ndarray, max_iters: int, tol: float
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Plain Lloyd iterations from fixed initial centroids.

    Returns (assignments, final centroids, objective history). The
    objective (sum of squared distances to the assigned centroid) is
    recorded after each assignment step; empty clusters keep their
    centroid in place. Ties in assignment go to the lowest centroid index.
    """
    cents = centroids.astype(np.float64).copy()
    assign = np.zeros(len(features), dtype=np.int64)
    history: list[float] = []
    for _ in range(max_iters):
        d2 = ((features[:, None, :] - cents[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        history.append(float(d2[np.arange(len(features)), assign].sum()))
        new_cents = cents.copy()
        for c in range(len(cents)):
            members = features[assign == c]
            if len(members):
                new_cents[c] = members.mean(axis=0)
        movement = float(np.sqrt(((new_cents - cents) ** 2).sum(axis=1)).max())
        cents = new_cents
        if movement < tol:
            break
    return assign, cents, history


def estimate_parts_detailed(
    m: SaliencyMap, img: ColorImage | None, cfg: PartConfig
) -> PartEstimate:
    """Cluster the positive-saliency pixels and box each cluster.

    Feature vectors are (x/width, y/height, saliency) plus RGB/255 when
    cfg.use_rgb is set; centroids start at the find_peaks locations. Boxes
    are the tight bounds of each non-empty cluster's pixel coordinates.
    """
    if cfg.use_rgb and img is None:
        raise InputError("use_rgb requires the source image")
    if img is not None and (img.width != m.width or img.height != m.height):
        raise InputError(
            f"image is {img.width}x{img.height} but saliency map is {m.width}x{m.height}"
        )
    v = m.values
    ys, xs = np.nonzero(v > 0)
    if ys.size == 0:
        return PartEstimate([], np.zeros(0, dtype=np.int64), np.zeros((0, 2), dtype=np.int64),
                            np.zeros((0, 3)), [])
    cols = [xs / m.width, ys / m.height, v[ys, xs]]
    if cfg.use_rgb:
        rgb = img.pixels[ys, xs] / 255.0
        cols.extend(rgb.T)
    features = np.column_stack(cols)
    seeds = find_peaks(m, cfg.k, cfg.peak_min_distance)
    init = np.array(
        [features[(xs == sx) & (ys == sy)][0] for sx, sy in seeds], dtype=np.float64
    )
    assign, cents, history = lloyd_kmeans(features, init, cfg.max_iters, cfg.tol)
    boxes: list[Box] = []
    for c in range(len(init)):
        sel = assign == c
        if not sel.any():
            continue
        cx, cy = xs[sel], ys[sel]
        x0, x1 = int(cx.min()), int(cx.max())
        y0, y1 = int(cy.min()), int(cy.max())
        boxes.append(Box(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
    coords = np.column_stack((xs, ys)).astype(np.int64)
    return PartEstimate(boxes, assign, coords, cents, history)


def estimate_parts(m: SaliencyMap, img: ColorImage | None, cfg: PartConfig) -> list[Box]:
    """Part boxes only; see estimate_parts_detailed."""
    return estimate_parts_detailed(m, img, cfg).boxes


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def write_raster(values: np.ndarray, path: str | os.PathLike) -> None:
    """Write one scalar map: 8-byte (width, height) LE header + f32 LE row-major."""
    arr = np.ascontiguousarray(values, dtype="<f4")
    if arr.ndim != 2:
        raise InputError(f"raster must be 2-d, got shape {arr.shape}")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(_RASTER_HEADER.pack(w, h))
        fh.write(arr.tobytes())


def read_raster(path: str | os.PathLike) -> np.ndarray:
    """Read a scalar map written by write_raster; returns float64 (h, w)."""
    try:
        with open(path, "rb") as fh:
            head = fh.read(_RASTER_HEADER.size)
            if len(head) != _RASTER_HEADER.size:
                raise InputError(f"raster file {path} is truncated")
            w, h = _RASTER_HEADER.unpack(head)
            data = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read raster {path}: {exc}") from exc
    expected = w * h * 4
    if len(data) != expected:
        raise InputError(
            f"raster file {path} declares {w}x{h} but holds {len(data)} payload bytes"
        )
    return np.frombuffer(data, dtype="<f4").reshape(h, w).astype(np.float64)


def load_gradient_maps(directory: str | os.PathLike) -> GradientMapSet:
    """Load a gradient-map directory: dims.json plus one grad_<dim>.bin per dim."""
    dims_path = os.path.join(os.fspath(directory), "dims.json")
    try:
        with open(dims_path, "r", encoding="utf-8") as fh:
            dims = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {dims_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{dims_path} is not valid JSON: {exc}") from exc
    if not isinstance(dims, list) or not all(isinstance(d, int) for d in dims):
        raise InputError(f"{dims_path} must hold a JSON array of integer dimensions")
    maps = []
    shape = None
    for d in dims:
        m = read_raster(os.path.join(os.fspath(directory), f"grad_{d}.bin"))
        if shape is None:
            shape = m.shape
        elif m.shape != shape:
            raise InputError(
                f"grad_{d}.bin is {m.shape[1]}x{m.shape[0]} but earlier maps are "
                f"{shape[1]}x{shape[0]}"
            )
        maps.append(m)
    return GradientMapSet(tuple(dims), np.stack(maps))


def save_gradient_maps(g: GradientMapSet, directory: str | os.PathLike) -> None:
    """Write a GradientMapSet in the directory layout load_gradient_maps reads."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(os.fspath(directory), "dims.json"), "w", encoding="utf-8") as fh:
        json.dump(list(g.dims), fh)
    for d, m in zip(g.dims, g.maps):
        write_raster(m, os.path.join(os.fspath(directory), f"grad_{d}.bin"))


def load_feature_weights(path: str | os.PathLike) -> FeatureWeights:
    """Load classifier weights: JSON {classes, dim, weights} with row-major weights."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc
    try:
        classes, dim, flat = int(doc["classes"]), int(doc["dim"]), doc["weights"]
    except (KeyError, TypeError) as exc:
        raise InputError(f"{path} must hold an object with classes, dim, weights") from exc
    if not isinstance(flat, list) or len(flat) != classes * dim:
        raise InputError(
            f"{path}: weights must be a flat row-major array of classes*dim entries"
        )
    return FeatureWeights(np.asarray(flat, dtype=np.float64).reshape(classes, dim))
