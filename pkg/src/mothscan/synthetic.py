"""Deterministic synthetic scenes for detector validation and benchmarking.

Real capture-session imagery cannot ship with the package, so validation
runs on generated scenes that mimic what a light trap sees: dark compact
insects on an evenly lit bright surface with mild sensor noise. Each scene
comes with exact ground-truth boxes derived from the rendered masks, which
makes detector quality measurable without any manual annotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .detector import DetectorConfig
from .errors import InputError
from .raster import Box, GrayImage


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of the ellipse-scene generator.

    Ellipses are dark (intensity well below the background), rotated, with
    semi-axes drawn from [min_axis, max_axis]. Bounding circles of distinct
    ellipses keep at least ``min_separation`` pixels of clearance, so blobs
    never touch and every ground-truth box is unambiguous.
    """

    width: int = 1024
    height: int = 1024
    min_ellipses: int = 3
    max_ellipses: int = 12
    min_axis: float = 8.0
    max_axis: float = 60.0
    min_separation: float = 40.0
    background: float = 255.0
    min_intensity: float = 20.0
    max_intensity: float = 120.0
    noise_sigma: float = 5.0
    border_margin: float = 8.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InputError("scene dimensions must be >= 1")
        if not (1 <= self.min_ellipses <= self.max_ellipses):
            raise InputError("need 1 <= min_ellipses <= max_ellipses")
        if not (0 < self.min_axis <= self.max_axis):
            raise InputError("need 0 < min_axis <= max_axis")


def render_ellipse_mask(
    height: int,
    width: int,
    cx: float,
    cy: float,
    ax: float,
    bx: float,
    theta: float,
) -> np.ndarray:
    """Boolean mask of a rotated ellipse, evaluated on pixel centers."""
    r = max(ax, bx)
    x0 = max(0, int(math.floor(cx - r - 1)))
    x1 = min(width - 1, int(math.ceil(cx + r + 1)))
    y0 = max(0, int(math.floor(cy - r - 1)))
    y1 = min(height - 1, int(math.ceil(cy + r + 1)))
    mask = np.zeros((height, width), dtype=bool)
    if x1 < x0 or y1 < y0:
        return mask
    ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    dx = xs - cx
    dy = ys - cy
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    u = (dx * cos_t + dy * sin_t) / ax
    v = (-dx * sin_t + dy * cos_t) / bx
    mask[y0 : y1 + 1, x0 : x1 + 1] = u * u + v * v <= 1.0
    return mask


def mask_bbox(mask: np.ndarray) -> Box | None:
    """Tight bounding box of the True pixels, or None for an empty mask."""
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        return None
    y0, y1 = int(ys.min()), int(ys.max())
    x0, x1 = int(xs.min()), int(xs.max())
    return Box(x0, y0, x1 - x0 + 1, y1 - y0 + 1)


def ellipse_scene(
    rng: np.random.Generator, spec: SceneSpec = SceneSpec()
) -> tuple[GrayImage, list[Box]]:
    """One bright scene with dark, well-separated rotated ellipses.

    Returns the noisy image and the tight mask-derived ground-truth box of
    every ellipse, in placement order. Placement uses rejection sampling on
    bounding circles; geometry is drawn before each placement attempt so
    the stream of random draws is reproducible for a given generator state.
    """
    n = int(rng.integers(spec.min_ellipses, spec.max_ellipses + 1))
    img = np.full((spec.height, spec.width), spec.background, dtype=np.float64)
    placed: list[tuple[float, float, float]] = []  # (cx, cy, bounding radius)
    boxes: list[Box] = []
    for _ in range(n):
        for _attempt in range(1000):
            ax = float(rng.uniform(spec.min_axis, spec.max_axis))
            bx = float(rng.uniform(spec.min_axis, spec.max_axis))
            theta = float(rng.uniform(0.0, math.pi))
            r = max(ax, bx)
            lo = r + spec.border_margin
            if spec.width - lo <= lo or spec.height - lo <= lo:
                continue
            cx = float(rng.uniform(lo, spec.width - lo))
            cy = float(rng.uniform(lo, spec.height - lo))
            if all(
                math.hypot(cx - px, cy - py) >= r + pr + spec.min_separation
                for px, py, pr in placed
            ):
                break
        else:
            raise InputError(
                f"could not place {n} ellipses with separation "
                f"{spec.min_separation} in a {spec.width}x{spec.height} scene"
            )
        mask = render_ellipse_mask(spec.height, spec.width, cx, cy, ax, bx, theta)
        box = mask_bbox(mask)
        if box is None:  # pragma: no cover - axes >= min_axis always hit pixels
            continue
        img[mask] = float(rng.uniform(spec.min_intensity, spec.max_intensity))
        placed.append((cx, cy, r))
        boxes.append(box)
    if spec.noise_sigma > 0:
        img += rng.normal(0.0, spec.noise_sigma, size=img.shape)
        np.clip(img, 0.0, 255.0, out=img)
    return GrayImage(img), boxes


def scene_suite(
    n_scenes: int = 50, seed: int = 20210317, spec: SceneSpec = SceneSpec()
) -> list[tuple[GrayImage, list[Box]]]:
    """The fixed validation suite: ``n_scenes`` scenes from one seeded stream."""
    rng = np.random.default_rng(seed)
    return [ellipse_scene(rng, spec) for _ in range(n_scenes)]


def two_blob_saliency(
    rng: np.random.Generator,
    size: int = 192,
    min_radius: float = 8.0,
    max_radius: float = 20.0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Saliency map holding two cone-shaped blobs, plus their support masks.

    Each blob peaks at 1.0 in its center and falls linearly to zero at its
    radius, so the map has exactly two local maxima and compact nonzero
    support. Centers are at least four times the larger radius apart.
    """
    r1 = float(rng.uniform(min_radius, max_radius))
    r2 = float(rng.uniform(min_radius, max_radius))
    sep = 4.0 * max(r1, r2)
    for _ in range(10000):
        c1 = rng.uniform(max_radius + 1, size - max_radius - 1, size=2)
        c2 = rng.uniform(max_radius + 1, size - max_radius - 1, size=2)
        if math.hypot(c1[0] - c2[0], c1[1] - c2[1]) >= sep:
            break
    else:
        raise InputError(f"cannot separate two blobs by {sep:.1f} in a {size}px map")
    ys, xs = np.mgrid[0:size, 0:size]
    sal = np.zeros((size, size), dtype=np.float64)
    masks = []
    for (cx, cy), r in (((c1[0], c1[1]), r1), ((c2[0], c2[1]), r2)):
        d = np.hypot(xs - cx, ys - cy)
        cone = np.maximum(0.0, 1.0 - d / r)
        masks.append(cone > 0.0)
        sal = np.maximum(sal, cone)
    return sal, masks[0], masks[1]


def performance_image(n_pixels: int = 20_000_000, seed: int = 7) -> GrayImage:
    """A 5000x4000 (by default) noisy scene for timing and memory checks."""
    width = 5000
    height = int(round(n_pixels / width))
    spec = SceneSpec(width=width, height=height, min_ellipses=12, max_ellipses=12)
    img, _ = ellipse_scene(np.random.default_rng(seed), spec)
    return img


def tuned_detector_config() -> DetectorConfig:
    """Detector settings tuned by grid search on held-out generated scenes.

    See scripts/tune_synthetic.py for the search that produced these values.
    """
    return DetectorConfig(
        blur_radius=2,
        threshold_method="global_mean",
        local_window=31,
        morph_open_radius=1,
        morph_close_radius=0,
        min_area=60,
        max_recursion=1,
        split_min_children=2,
        nms_iou=0.3,
    )
