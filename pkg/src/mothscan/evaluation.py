"""Detection evaluation: greedy matching, PR curves and average precision.

Single-class protocol (insect vs background): predictions from all images
are pooled by score while matching stays per-image, and AP is the area
under the precision envelope over recall, reported per IoU threshold.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .errors import InputError
from .raster import Box, Detection, iou


@dataclass(frozen=True)
class GroundTruthImage:
    """Annotated boxes of one image; labels are optional species identifiers."""

    image_id: str
    boxes: tuple[Box, ...]
    labels: tuple[str | None, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))
        labels = tuple(self.labels) if self.labels else (None,) * len(self.boxes)
        if len(labels) != len(self.boxes):
            raise InputError(f"image {self.image_id}: labels do not align with boxes")
        object.__setattr__(self, "labels", labels)


@dataclass(frozen=True, eq=False)
class EvalReport:
    """AP per IoU threshold plus the raw PR points each AP was computed from."""

    per_threshold: dict[float, float]
    pr_curves: dict[float, list[tuple[float, float]]] = field(default_factory=dict)
    n_ground_truths: int = 0
    n_predictions: int = 0

    def to_json(self) -> str:
        doc = {
            "per_threshold": {f"{t:.2f}": ap for t, ap in self.per_threshold.items()},
            "pr_curves": {
                f"{t:.2f}": [[r, p] for r, p in pts] for t, pts in self.pr_curves.items()
            },
            "counts": {
                "ground_truths": self.n_ground_truths,
                "predictions": self.n_predictions,
            },
        }
        return json.dumps(doc, indent=2)

    def write_pr_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("iou_threshold,recall,precision\n")
            for t in sorted(self.pr_curves):
                for r, p in self.pr_curves[t]:
                    fh.write(f"{t:.2f},{r!r},{p!r}\n")


def match_greedy(
    preds: list[Detection], gts: list[Box], iou_thresh: float
) -> tuple[list[bool], int]:
    """Match predictions to ground truths in descending score order.

    Each prediction claims the unmatched ground truth of highest IoU when
    that IoU reaches the threshold (a true positive, consuming the ground
    truth) and is a false positive otherwise. Returns the TP/FP flags in
    descending-score order plus the count of ground truths left unmatched.
    Score ties keep input order; IoU ties take the earliest ground truth.
    """
    order = sorted(range(len(preds)), key=lambda i: -preds[i].score)
    taken = [False] * len(gts)
    flags: list[bool] = []
    for i in order:
        best_iou, best_j = 0.0, -1
        for j, gt in enumerate(gts):
            if taken[j]:
                continue
            v = iou(preds[i].box, gt)
            if v > best_iou:
                best_iou, best_j = v, j
        if best_j >= 0 and best_iou >= iou_thresh:
            taken[best_j] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags, len(gts) - sum(taken)


def average_precision(flags: list[bool], n_gt: int) -> float:
    """Area under the precision envelope over recall, all-point interpolation.

    ``flags`` must be in descending-score order. With no ground truths the
    AP is defined as 0.
    """
    if n_gt == 0:
        return 0.0
    tp = 0
    precisions: list[float] = []
    recalls: list[float] = []
    for i, is_tp in enumerate(flags, start=1):
        tp += is_tp
        precisions.append(tp / i)
        recalls.append(tp / n_gt)
    # envelope: precision at each point becomes the max at any >= recall
    for i in range(len(precisions) - 2, -1, -1):
        precisions[i] = max(precisions[i], precisions[i + 1])
    ap = 0.0
    prev_r = 0.0
    for r, p in zip(recalls, precisions):
        if r > prev_r:
            ap += (r - prev_r) * p
            prev_r = r
    return ap


def pr_points(flags: list[bool], n_gt: int) -> list[tuple[float, float]]:
    """Raw (recall, precision) points along the descending-score ranking."""
    pts = []
    tp = 0
    for i, is_tp in enumerate(flags, start=1):
        tp += is_tp
        pts.append((tp / n_gt if n_gt else 0.0, tp / i))
    return pts


def map_at(
    dataset_preds: dict[str, list[Detection]],
    dataset_gts: dict[str, GroundTruthImage],
    thresholds: list[float],
) -> EvalReport:
    """Evaluate pooled predictions against ground truth at several IoU thresholds.

    Matching runs per image; the resulting flags are pooled in global
    descending-score order (ties by image id, then input order) and one AP
    is computed per threshold over the pooled ranking.
    """
    unknown = sorted(set(dataset_preds) - set(dataset_gts))
    if unknown:
        raise InputError(f"predictions reference unknown image ids: {', '.join(unknown)}")
    n_gt = sum(len(g.boxes) for g in dataset_gts.values())
    n_pred = sum(len(p) for p in dataset_preds.values())
    per_threshold: dict[float, float] = {}
    pr_curves: dict[float, list[tuple[float, float]]] = {}
    for t in thresholds:
        ranked: list[tuple[float, str, int, bool]] = []
        for image_id in sorted(dataset_preds):
            preds = dataset_preds[image_id]
            order = sorted(range(len(preds)), key=lambda i: -preds[i].score)
            flags, _ = match_greedy(preds, list(dataset_gts[image_id].boxes), t)
            for rank_i, flag in zip(order, flags):
                ranked.append((-preds[rank_i].score, image_id, rank_i, flag))
        ranked.sort(key=lambda r: r[:3])
        pooled = [flag for *_key, flag in ranked]
        per_threshold[t] = average_precision(pooled, n_gt)
        pr_curves[t] = pr_points(pooled, n_gt)
    return EvalReport(per_threshold, pr_curves, n_gt, n_pred)
