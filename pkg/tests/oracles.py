"""Independent reference implementations used to cross-check the package.

Everything here is written as literally as possible — Fractions, explicit
loops, flood fill, exhaustive scans — trading speed for obviousness, so a
disagreement with the optimized implementations points at a real bug.
"""

from __future__ import annotations

from collections import deque
from fractions import Fraction

import numpy as np

from mothscan.raster import Box, Detection


def iou_fraction(a: Box, b: Box) -> Fraction:
    ix = max(0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    union = a.w * a.h + b.w * b.h - inter
    return Fraction(inter, union)


def box_blur_naive(px: np.ndarray, radius: int) -> np.ndarray:
    """Per-pixel windowed mean with coordinates clamped to the image."""
    h, w = px.shape
    out = np.zeros_like(px, dtype=np.float64)
    n = 2 * radius + 1
    for y in range(h):
        for x in range(w):
            total = 0.0
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    yy = min(max(y + dy, 0), h - 1)
                    xx = min(max(x + dx, 0), w - 1)
                    total += px[yy, xx]
            out[y, x] = total / (n * n)
    return out


def high_pass_naive(px: np.ndarray, radius: int) -> np.ndarray:
    return np.abs(px - box_blur_naive(px, radius))


def erode_naive(mask: np.ndarray, offsets: list[tuple[int, int]]) -> np.ndarray:
    """Set-definition erosion; outside-image pixels count as background."""
    h, w = mask.shape
    out = np.zeros_like(mask, dtype=bool)
    for y in range(h):
        for x in range(w):
            ok = True
            for dy, dx in offsets:
                yy, xx = y + dy, x + dx
                if not (0 <= yy < h and 0 <= xx < w) or not mask[yy, xx]:
                    ok = False
                    break
            out[y, x] = ok
    return out


def dilate_naive(mask: np.ndarray, offsets: list[tuple[int, int]]) -> np.ndarray:
    """Set-definition dilation with a symmetric structuring element."""
    h, w = mask.shape
    out = np.zeros_like(mask, dtype=bool)
    for y in range(h):
        for x in range(w):
            hit = False
            for dy, dx in offsets:
                yy, xx = y + dy, x + dx
                if 0 <= yy < h and 0 <= xx < w and mask[yy, xx]:
                    hit = True
                    break
            out[y, x] = hit
    return out


def open_naive(mask: np.ndarray, offsets: list[tuple[int, int]]) -> np.ndarray:
    return dilate_naive(erode_naive(mask, offsets), offsets)


def close_naive(mask: np.ndarray, offsets: list[tuple[int, int]]) -> np.ndarray:
    return erode_naive(dilate_naive(mask, offsets), offsets)


def flood_components(mask: np.ndarray) -> list[tuple[Box, int]]:
    """8-connected components via breadth-first flood fill."""
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    comps: list[tuple[Box, int]] = []
    for y0 in range(h):
        for x0 in range(w):
            if not mask[y0, x0] or seen[y0, x0]:
                continue
            queue = deque([(y0, x0)])
            seen[y0, x0] = True
            pixels = []
            while queue:
                y, x = queue.popleft()
                pixels.append((y, x))
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        yy, xx = y + dy, x + dx
                        if 0 <= yy < h and 0 <= xx < w and mask[yy, xx] and not seen[yy, xx]:
                            seen[yy, xx] = True
                            queue.append((yy, xx))
            ys = [p[0] for p in pixels]
            xs = [p[1] for p in pixels]
            box = Box(min(xs), min(ys), max(xs) - min(xs) + 1, max(ys) - min(ys) + 1)
            comps.append((box, len(pixels)))
    return sorted(comps, key=lambda c: (c[0].y, c[0].x, c[0].w, c[0].h))


def otsu_scan(px: np.ndarray) -> np.ndarray:
    """Exhaustive 256-candidate threshold scan, plain loops."""
    levels = np.clip(np.floor(px), 0, 255).astype(int)
    hist = [0] * 256
    for v in levels.ravel():
        hist[v] += 1
    total = levels.size
    best_var, best_t = 0.0, None
    for t in range(256):
        n0 = sum(hist[: t + 1])
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        mu0 = sum(v * hist[v] for v in range(t + 1)) / n0
        mu1 = sum(v * hist[v] for v in range(t + 1, 256)) / n1
        var = (n0 / total) * (n1 / total) * (mu0 - mu1) ** 2
        if var > best_var:
            best_var, best_t = var, t
    if best_t is None or best_var <= 0.0:
        return np.zeros_like(px, dtype=bool)
    return px > best_t


def nms_naive(dets: list[Detection], thresh: float) -> list[Detection]:
    """Literal greedy suppression: pick the best, drop heavy overlaps, repeat."""
    pool = sorted(dets, key=lambda d: (-d.score, d.box.y, d.box.x, d.box.w, d.box.h))
    kept: list[Detection] = []
    while pool:
        best = pool.pop(0)
        kept.append(best)
        pool = [d for d in pool if float(iou_fraction(d.box, best.box)) <= thresh]
    return kept


def match_naive(
    preds: list[Detection], gts: list[Box], thresh: float
) -> tuple[list[bool], int]:
    """Protocol simulation of greedy prediction/ground-truth matching."""
    indexed = sorted(enumerate(preds), key=lambda t: (-t[1].score, t[0]))
    unmatched = set(range(len(gts)))
    flags = []
    for _, pred in indexed:
        best_j, best_v = None, Fraction(0)
        for j in sorted(unmatched):
            v = iou_fraction(pred.box, gts[j])
            if v > best_v:
                best_v, best_j = v, j
        if best_j is not None and best_v >= Fraction(thresh).limit_denominator(10**9):
            unmatched.discard(best_j)
            flags.append(True)
        else:
            flags.append(False)
    return flags, len(unmatched)


def ap_naive(flags: list[bool], n_gt: int) -> float:
    """All-point interpolation via the sum-over-true-positives identity.

    Every true positive adds 1/n_gt of the enveloped precision at its rank,
    where the envelope takes the best precision at any later rank too.
    """
    if n_gt == 0:
        return 0.0
    precisions = []
    tp = 0
    for i, f in enumerate(flags, start=1):
        tp += f
        precisions.append(tp / i)
    total = 0.0
    for i, f in enumerate(flags):
        if f:
            total += max(precisions[i:])
    return total / n_gt
