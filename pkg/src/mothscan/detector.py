"""Background-free blob detection for camera-trap images.

Pipeline: high-pass filtering (absolute residual against a box-blur
background estimate, so no reference frame is needed), binarization,
morphological cleanup, connected components, recursive per-box splitting
of merged blobs, and greedy NMS. Every stage is a pure function and the
whole pipeline is deterministic, so batch drivers can fan out across
images freely.

The box blur runs on cumulative sums (cost independent of the radius) and
the square structuring elements decompose into two 1-d passes; a
20-megapixel frame stays both under two seconds and within a few image
buffers of memory, which is what the edge deployment needs.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import InputError
from .raster import BinaryImage, Box, Detection, GrayImage, crop, iou

THRESHOLD_METHODS = ("global_mean", "otsu", "local_gaussian")


@dataclass(frozen=True)
class DetectorConfig:
    """Tunables of the blob detector; defaults are a starting point for `tune`."""

    blur_radius: int = 15
    threshold_method: str = "global_mean"
    local_window: int = 31
    morph_open_radius: int = 1
    morph_close_radius: int = 3
    min_area: int = 50
    max_recursion: int = 2
    split_min_children: int = 2
    nms_iou: float = 0.3

    def __post_init__(self):
        if self.blur_radius < 1:
            raise InputError("blur_radius must be >= 1")
        if self.threshold_method not in THRESHOLD_METHODS:
            raise InputError(
                f"threshold_method must be one of {THRESHOLD_METHODS}, "
                f"got {self.threshold_method!r}"
            )
        if self.min_area < 1:
            raise InputError("min_area must be >= 1")
        if not (0.0 <= self.nms_iou <= 1.0):
            raise InputError("nms_iou must be within [0, 1]")
        if self.max_recursion < 0:
            raise InputError("max_recursion must be >= 0")
        if self.split_min_children < 2:
            raise InputError("split_min_children must be >= 2")
        if self.morph_open_radius < 0 or self.morph_close_radius < 0:
            raise InputError("morphology radii must be >= 0 (0 skips the stage)")

    def to_json(self) -> str:
        return json.dumps({f.name: getattr(self, f.name) for f in fields(self)}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "DetectorConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"detector config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise InputError("detector config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise InputError(f"unknown detector config fields: {', '.join(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "DetectorConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                return cls.from_json(fh.read())
        except OSError as exc:
            raise InputError(f"cannot read detector config {path}: {exc}") from exc


@dataclass(frozen=True)
class StructuringElement:
    """Neighborhood for morphology: a centered square or disk of given radius."""

    shape: str = "square"
    radius: int = 1

    def __post_init__(self):
        if self.shape not in ("square", "disk"):
            raise InputError(f"structuring element shape must be square or disk, got {self.shape!r}")
        if self.radius < 1:
            raise InputError("structuring element radius must be >= 1")

    def offsets(self) -> list[tuple[int, int]]:
        """(dy, dx) offsets covered by the element, origin included."""
        r = self.radius
        out = []
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                if self.shape == "square" or dy * dy + dx * dx <= r * r:
                    out.append((dy, dx))
        return out


# ---------------------------------------------------------------------------
# filtering
# ---------------------------------------------------------------------------


def _box_sum_2d(arr: np.ndarray, radius: int) -> np.ndarray:
    """Sum over a clamped (2r+1)^2 window at every pixel, via prefix sums.

    Out-of-image coordinates clamp to the nearest edge pixel. Buffers are
    freed between the two axis passes so at most two full-size arrays are
    alive at once (the 20-megapixel memory budget depends on this).
    """
    r = radius
    n = 2 * r + 1
    h, w = arr.shape
    p = np.empty((h, w + n), dtype=np.float64)
    p[:, 0] = 0.0
    p[:, 1 : r + 1] = arr[:, :1]
    p[:, r + 1 : r + 1 + w] = arr
    p[:, r + 1 + w :] = arr[:, w - 1 : w]
    np.cumsum(p, axis=1, out=p)
    rows = p[:, n:] - p[:, :w]
    del p
    p = np.empty((h + n, w), dtype=np.float64)
    p[0] = 0.0
    p[1 : r + 1] = rows[0]
    p[r + 1 : r + 1 + h] = rows
    p[r + 1 + h :] = rows[h - 1]
    del rows
    np.cumsum(p, axis=0, out=p)
    out = p[n:] - p[:h]
    del p
    return out


def low_pass(img: GrayImage, radius: int) -> GrayImage:
    """Box-filter mean over a (2r+1)^2 window; borders replicate edge pixels."""
    if radius < 1:
        raise InputError("low_pass radius must be >= 1")
    acc = _box_sum_2d(img.pixels, radius)
    win = 2 * radius + 1
    acc /= win * win
    return GrayImage(acc)


def high_pass(img: GrayImage, radius: int) -> GrayImage:
    """Absolute residual against the box-blur background estimate.

    The absolute value makes both dark insects and bright highlights
    respond, which replaces background-image subtraction.
    """
    res = _high_pass_array(img.pixels, radius)
    return GrayImage(res)


def _high_pass_array(px: np.ndarray, radius: int) -> np.ndarray:
    if radius < 1:
        raise InputError("high_pass radius must be >= 1")
    acc = _box_sum_2d(px, radius)
    win = 2 * radius + 1
    acc /= win * win
    np.subtract(px, acc, out=acc)
    np.abs(acc, out=acc)
    return acc


# ---------------------------------------------------------------------------
# binarization
# ---------------------------------------------------------------------------


def threshold_global_mean(img: GrayImage) -> BinaryImage:
    """Foreground wherever the value strictly exceeds the image-wide mean."""
    px = img.pixels
    return BinaryImage(px > px.mean())


def threshold_otsu(img: GrayImage) -> BinaryImage:
    """Binarize at the 256-bin threshold maximizing between-class variance.

    Values are binned by floor and clipped to [0, 255]; ties pick the
    lowest threshold and foreground is `value > threshold`. A histogram no
    split can separate (e.g. a constant image) yields all background.
    """
    px = img.pixels
    levels = np.clip(np.floor(px), 0, 255).astype(np.int64)
    hist = np.bincount(levels.ravel(), minlength=256).astype(np.float64)
    total = hist.sum()
    probs = hist / total
    bins = np.arange(256, dtype=np.float64)
    # cumulative weight and mean of the background class (bins <= t)
    w0 = np.cumsum(probs)
    mu0_sum = np.cumsum(probs * bins)
    mu_total = mu0_sum[-1]
    w1 = 1.0 - w0
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = np.where(w0 > 0, mu0_sum / w0, 0.0)
        mu1 = np.where(w1 > 0, (mu_total - mu0_sum) / w1, 0.0)
    var_between = w0 * w1 * (mu0 - mu1) ** 2
    best = float(var_between.max())
    if best <= 0.0:
        return BinaryImage(np.zeros_like(px, dtype=bool))
    t = int(np.flatnonzero(var_between == best)[0])
    return BinaryImage(px > t)


def threshold_local_gaussian(img: GrayImage, window: int, offset: float = 0.0) -> BinaryImage:
    """Foreground where value > Gaussian-weighted local mean minus offset.

    The window must be odd and >= 3; sigma is window/6 and borders
    replicate edge pixels.
    """
    if window < 3 or window % 2 == 0:
        raise InputError(f"local gaussian window must be odd and >= 3, got {window}")
    r = window // 2
    sigma = window / 6.0
    x = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-0.5 * (x / sigma) ** 2)
    g /= g.sum()
    px = img.pixels

    def weighted_pass(arr: np.ndarray, axis: int) -> np.ndarray:
        # accumulating weighted deviations from the center keeps constant
        # regions exactly unchanged, so the strict > cut is well defined
        pad = ((0, 0), (r, r)) if axis == 1 else ((r, r), (0, 0))
        p = np.pad(arr, pad, mode="edge")
        acc = np.zeros_like(arr)
        for k in range(window):
            sl = p[:, k : k + arr.shape[1]] if axis == 1 else p[k : k + arr.shape[0], :]
            acc += g[k] * (sl - arr)
        return arr + acc

    mean = weighted_pass(weighted_pass(px, 1), 0)
    return BinaryImage(px > mean - offset)


# ---------------------------------------------------------------------------
# morphology (outside-image pixels are background)
# ---------------------------------------------------------------------------


def _erode_mask(mask: np.ndarray, se: StructuringElement) -> np.ndarray:
    h, w = mask.shape
    r = se.radius
    if se.shape == "square":
        # separable: a square SE is a horizontal run of a vertical run
        out = mask
        for axis in (0, 1):
            pad = ((r, r), (0, 0)) if axis == 0 else ((0, 0), (r, r))
            p = np.pad(out, pad, mode="constant", constant_values=False)
            out = np.ones((h, w), dtype=bool)
            for k in range(2 * r + 1):
                if axis == 0:
                    out &= p[k : k + h, :]
                else:
                    out &= p[:, k : k + w]
        return out
    p = np.pad(mask, r, mode="constant", constant_values=False)
    out = np.ones((h, w), dtype=bool)
    for dy, dx in se.offsets():
        out &= p[r + dy : r + dy + h, r + dx : r + dx + w]
    return out


def _dilate_mask(mask: np.ndarray, se: StructuringElement) -> np.ndarray:
    h, w = mask.shape
    r = se.radius
    if se.shape == "square":
        out = mask
        for axis in (0, 1):
            pad = ((r, r), (0, 0)) if axis == 0 else ((0, 0), (r, r))
            p = np.pad(out, pad, mode="constant", constant_values=False)
            out = np.zeros((h, w), dtype=bool)
            for k in range(2 * r + 1):
                if axis == 0:
                    out |= p[k : k + h, :]
                else:
                    out |= p[:, k : k + w]
        return out
    p = np.pad(mask, r, mode="constant", constant_values=False)
    out = np.zeros((h, w), dtype=bool)
    for dy, dx in se.offsets():
        out |= p[r + dy : r + dy + h, r + dx : r + dx + w]
    return out


def erode(b: BinaryImage, se: StructuringElement) -> BinaryImage:
    """Keep a pixel only if every SE offset lands on foreground."""
    return BinaryImage(_erode_mask(b.mask, se))


def dilate(b: BinaryImage, se: StructuringElement) -> BinaryImage:
    """Mark a pixel if any SE offset reaches foreground."""
    return BinaryImage(_dilate_mask(b.mask, se))


def open_mask(b: BinaryImage, se: StructuringElement) -> BinaryImage:
    """Erosion then dilation; removes speckles smaller than the element."""
    return BinaryImage(_dilate_mask(_erode_mask(b.mask, se), se))


def close_mask(b: BinaryImage, se: StructuringElement) -> BinaryImage:
    """Dilation then erosion; fills gaps smaller than the element."""
    return BinaryImage(_erode_mask(_dilate_mask(b.mask, se), se))


# ---------------------------------------------------------------------------
# connected components
# ---------------------------------------------------------------------------


def connected_components(b: BinaryImage) -> list[tuple[Box, int]]:
    """8-connected components as (tight bounding box, pixel count) pairs.

    Output is sorted by (y, x) of the box origin. Components are tracked
    as row runs with union-find, so cost scales with the number of runs
    rather than with image area.
    """
    mask = b.mask
    h, w = mask.shape
    parent: list[int] = []
    run_row: list[int] = []
    run_start: list[int] = []
    run_end: list[int] = []  # exclusive

    def find(i: int) -> int:
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    prev_runs: list[int] = []
    for y in range(h):
        row = mask[y]
        if not row.any():
            prev_runs = []
            continue
        edges = np.flatnonzero(row[:-1] != row[1:]) + 1
        bounds = np.concatenate(([0], edges, [w]))
        cur_runs: list[int] = []
        first_fg = 0 if row[0] else 1
        for bi in range(first_fg, len(bounds) - 1, 2):
            s, e = int(bounds[bi]), int(bounds[bi + 1])
            rid = len(parent)
            parent.append(rid)
            run_row.append(y)
            run_start.append(s)
            run_end.append(e)
            cur_runs.append(rid)
            # 8-connectivity: runs [s,e) and [ps,pe) in adjacent rows touch
            # iff s <= pe and ps <= e
            for pid in prev_runs:
                if run_start[pid] > e:
                    break
                if run_end[pid] >= s:
                    ra, rb = find(rid), find(pid)
                    if ra != rb:
                        parent[rb] = ra
        prev_runs = cur_runs

    stats: dict[int, list[int]] = {}
    for rid in range(len(parent)):
        root = find(rid)
        y, s, e = run_row[rid], run_start[rid], run_end[rid]
        st = stats.get(root)
        if st is None:
            stats[root] = [s, e - 1, y, y, e - s]
        else:
            if s < st[0]:
                st[0] = s
            if e - 1 > st[1]:
                st[1] = e - 1
            if y < st[2]:
                st[2] = y
            if y > st[3]:
                st[3] = y
            st[4] += e - s
    comps = [
        (Box(x0, y0, x1 - x0 + 1, y1 - y0 + 1), area)
        for x0, x1, y0, y1, area in stats.values()
    ]
    comps.sort(key=lambda c: (c[0].y, c[0].x))
    return comps


# ---------------------------------------------------------------------------
# NMS and the full pipeline
# ---------------------------------------------------------------------------


def nms(dets: list[Detection], iou_thresh: float) -> list[Detection]:
    """Greedy non-maximum suppression.

    Keeps the highest-scored remaining detection and discards everything
    overlapping it with IoU strictly above the threshold. Score ties break
    by (y, x, w, h) so the result is deterministic.
    """
    order = sorted(dets, key=lambda d: (-d.score, d.box.y, d.box.x, d.box.w, d.box.h))
    kept: list[Detection] = []
    for d in order:
        if all(iou(d.box, k.box) <= iou_thresh for k in kept):
            kept.append(d)
    return kept


def _binarize(px: np.ndarray, cfg: DetectorConfig) -> BinaryImage:
    img = GrayImage(px)
    if cfg.threshold_method == "global_mean":
        return threshold_global_mean(img)
    if cfg.threshold_method == "otsu":
        return threshold_otsu(img)
    return threshold_local_gaussian(img, cfg.local_window, 0.0)


def _component_boxes(px: np.ndarray, cfg: DetectorConfig) -> list[tuple[Box, int]]:
    """Pre-processing, binarization and component stages on one array."""
    hp = _high_pass_array(px, cfg.blur_radius)
    mask = _binarize(hp, cfg)
    if cfg.morph_open_radius > 0:
        mask = open_mask(mask, StructuringElement("square", cfg.morph_open_radius))
    if cfg.morph_close_radius > 0:
        mask = close_mask(mask, StructuringElement("square", cfg.morph_close_radius))
    return [c for c in connected_components(mask) if c[1] >= cfg.min_area]


def _score(hp: np.ndarray, hp_max: float, box: Box) -> float:
    if hp_max <= 0.0:
        return 0.0
    mean = float(hp[box.y : box.y + box.h, box.x : box.x + box.w].mean())
    return min(1.0, max(0.0, mean / hp_max))


def _split(
    px: np.ndarray,
    hp: np.ndarray,
    hp_max: float,
    det: Detection,
    cfg: DetectorConfig,
    depth: int,
) -> list[Detection]:
    if depth >= cfg.max_recursion:
        return [det]
    bx = det.box
    sub = px[bx.y : bx.y + bx.h, bx.x : bx.x + bx.w]
    children = _component_boxes(sub, cfg)
    if len(children) < cfg.split_min_children:
        return [det]
    out: list[Detection] = []
    for cbox, _area in children:
        shifted = Box(cbox.x + bx.x, cbox.y + bx.y, cbox.w, cbox.h)
        child = Detection(shifted, _score(hp, hp_max, shifted))
        out.extend(_split(px, hp, hp_max, child, cfg, depth + 1))
    return out


def recursive_split(
    img: GrayImage, det: Detection, cfg: DetectorConfig, depth: int = 0
) -> list[Detection]:
    """Re-run blob detection inside one detection to break up merged blobs.

    If the crop decomposes into at least ``split_min_children`` components
    of sufficient area, the detection is replaced by the children (in
    image coordinates) and each child is split again up to
    ``max_recursion`` levels; otherwise the detection is returned as is.
    """
    if not det.box.fits_in(img.width, img.height):
        raise InputError("detection box exceeds image bounds")
    hp = _high_pass_array(img.pixels, cfg.blur_radius)
    return _split(img.pixels, hp, float(hp.max()), det, cfg, depth)


def detect(img: GrayImage, cfg: DetectorConfig) -> list[Detection]:
    """Run the full blob-detection pipeline on one grayscale image.

    Stages: high-pass, binarization per config, morphological open and
    close, connected components with an area floor, recursive splitting of
    merged blobs, then NMS. Scores are the mean high-pass response inside
    each box normalized by the image-wide maximum response.
    """
    px = img.pixels
    hp = _high_pass_array(px, cfg.blur_radius)
    mask = _binarize(hp, cfg)
    if cfg.morph_open_radius > 0:
        mask = open_mask(mask, StructuringElement("square", cfg.morph_open_radius))
    if cfg.morph_close_radius > 0:
        mask = close_mask(mask, StructuringElement("square", cfg.morph_close_radius))
    comps = [c for c in connected_components(mask) if c[1] >= cfg.min_area]
    hp_max = float(hp.max())
    dets = [Detection(box, _score(hp, hp_max, box)) for box, _ in comps]
    split_dets: list[Detection] = []
    for det in dets:
        split_dets.extend(_split(px, hp, hp_max, det, cfg, 0))
    return nms(split_dets, cfg.nms_iou)
