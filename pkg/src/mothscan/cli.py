"""Operator-facing command line: detection, evaluation, tuning and watch mode.

Exit codes are a stable scripting contract: 0 on success, 1 on any input
or validation problem (bad flags included), 2 on internal errors. The
MOTHSCAN_LOG environment variable (error|warn|info|debug) sets stderr log
verbosity.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import datetime as dt
import itertools
import json
import logging
import os
import sys
import time
from dataclasses import fields, replace

import numpy as np

from . import __version__
from .datasets import (
    AnnotationFile,
    ImageRecord,
    load_annotations,
    load_predictions,
    predictions_to_doc,
    resolve_path,
    stats,
)
from .detector import DetectorConfig, detect
from .errors import InputError
from .evaluation import GroundTruthImage, map_at
from .fusion import ProbVector, fuse_geometric
from .imgio import read_image, write_image
from .parts import (
    PartConfig,
    SaliencyMap,
    estimate_parts,
    load_gradient_maps,
    read_raster,
    saliency_from_gradmaps,
    sparsify_saliency,
)
from .raster import Box, ColorImage, Detection, GrayImage, crop, to_grayscale

log = logging.getLogger("mothscan")

SUPPORTED_METRICS = ("map@0.50", "map@0.75")
IMAGE_EXTENSIONS = (".png", ".pgm", ".ppm", ".pnm", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


def _setup_logging() -> None:
    levels = {
        "error": logging.ERROR,
        "warn": logging.WARNING,
        "info": logging.INFO,
        "debug": logging.DEBUG,
    }
    name = os.environ.get("MOTHSCAN_LOG", "warn").strip().lower()
    if name not in levels:
        raise InputError(f"MOTHSCAN_LOG must be one of {sorted(levels)}, got {name!r}")
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("[%(levelname)s] %(message)s"))
    log.handlers.clear()
    log.addHandler(handler)
    log.setLevel(levels[name])


class Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _grayscale(img: GrayImage | ColorImage) -> GrayImage:
    return img if isinstance(img, GrayImage) else to_grayscale(img)


def _image_id_for(path: str, taken: set[str]) -> str:
    stem = os.path.splitext(os.path.basename(path))[0]
    if stem in taken:
        raise InputError(f"duplicate image stem {stem!r}; rename inputs to disambiguate")
    return stem


# ---------------------------------------------------------------- detect


def cmd_detect(args) -> int:
    cfg = DetectorConfig.load(args.config) if args.config else DetectorConfig()
    records: list[ImageRecord] = []
    preds: dict[str, list[Detection]] = {}
    taken: set[str] = set()
    failures = 0
    for path in args.images:
        try:
            img = read_image(path)
        except InputError as exc:
            if not args.keep_going:
                raise
            log.error("%s", exc)
            failures += 1
            continue
        image_id = _image_id_for(path, taken)
        taken.add(image_id)
        dets = detect(_grayscale(img), cfg)
        records.append(ImageRecord(image_id, path, img.width, img.height))
        preds[image_id] = dets
        log.info("%s: %d detections", path, len(dets))
    doc = predictions_to_doc(records, preds)
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 1 if failures else 0


# ------------------------------------------------------------------ eval


def _ground_truth_by_image(ann: AnnotationFile) -> dict[str, GroundTruthImage]:
    grouped: dict[str, list] = {rec.image_id: [] for rec in ann.images}
    for b in ann.boxes:
        grouped[b.image_id].append(b)
    return {
        image_id: GroundTruthImage(
            image_id,
            tuple(b.box for b in blist),
            tuple(b.species for b in blist),
        )
        for image_id, blist in grouped.items()
    }


def _parse_thresholds(text: str) -> list[float]:
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise InputError(f"bad IoU threshold list {text!r}") from exc
    if not values or any(not (0.0 < v <= 1.0) for v in values):
        raise InputError("IoU thresholds must be in (0, 1]")
    return values


def cmd_eval(args) -> int:
    gts = _ground_truth_by_image(load_annotations(args.gt))
    _, preds = load_predictions(args.pred)
    only_pred = sorted(set(preds) - set(gts))
    if only_pred:
        raise InputError(f"prediction image id {only_pred[0]!r} missing from ground truth")
    only_gt = sorted(set(gts) - set(preds))
    if only_gt:
        raise InputError(f"ground-truth image id {only_gt[0]!r} missing from predictions")
    thresholds = _parse_thresholds(args.iou)
    report = map_at(preds, gts, thresholds)
    print(f"{'iou':>6}  {'AP':>8}")
    for t in thresholds:
        print(f"{t:>6.2f}  {report.per_threshold[t]:>8.4f}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
    if args.pr_csv:
        report.write_pr_csv(args.pr_csv)
    return 0


# ------------------------------------------------------------------ tune


def load_grid(path: str | os.PathLike) -> tuple[list[DetectorConfig], str | None]:
    """Expand a grid JSON file into configs in deterministic grid order.

    The file holds ``{"grid": {field: [values...]}, "objective": name?}``;
    fields not listed stay at their defaults. Order of expansion follows
    the field order in the file, last field varying fastest.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read grid {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("grid"), dict) or not doc["grid"]:
        raise InputError(f"{path}: expected an object with a non-empty 'grid' mapping")
    grid = doc["grid"]
    known = {f.name for f in fields(DetectorConfig)}
    unknown = sorted(set(grid) - known)
    if unknown:
        raise InputError(f"unknown detector config fields in grid: {', '.join(unknown)}")
    names = list(grid)
    for name in names:
        if not isinstance(grid[name], list) or not grid[name]:
            raise InputError(f"grid values for {name!r} must be a non-empty list")
    configs = []
    for combo in itertools.product(*(grid[name] for name in names)):
        configs.append(replace(DetectorConfig(), **dict(zip(names, combo))))
    return configs, doc.get("objective")


def _load_tune_images(
    ann: AnnotationFile, gt_path: str, images_dir: str | None
) -> dict[str, GrayImage]:
    loaded: dict[str, GrayImage] = {}
    for rec in ann.images:
        if images_dir is not None and not os.path.isabs(rec.file_path):
            path = os.path.join(images_dir, rec.file_path)
        else:
            path = resolve_path(gt_path, rec.file_path)
        loaded[rec.image_id] = _grayscale(read_image(path))
    return loaded


def _score_config(
    cfg: DetectorConfig,
    images: dict[str, GrayImage],
    gts: dict[str, GroundTruthImage],
    threshold: float,
) -> float:
    preds = {image_id: detect(img, cfg) for image_id, img in images.items()}
    report = map_at(preds, gts, [threshold])
    return report.per_threshold[threshold]


def cmd_tune(args) -> int:
    ann = load_annotations(args.gt)
    if not ann.boxes:
        raise InputError(f"{args.gt} holds no ground-truth boxes; nothing to tune against")
    configs, file_objective = load_grid(args.grid)
    metric = args.metric or file_objective or "map@0.50"
    if metric not in SUPPORTED_METRICS:
        raise InputError(f"unsupported metric {metric!r}; choose from {SUPPORTED_METRICS}")
    threshold = float(metric.split("@")[1])
    gts = _ground_truth_by_image(ann)
    images = _load_tune_images(ann, args.gt, args.images)
    log.info("tuning over %d configurations on %d images", len(configs), len(images))
    if args.jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=args.jobs) as pool:
            scores = list(pool.map(lambda c: _score_config(c, images, gts, threshold), configs))
    else:
        scores = [_score_config(cfg, images, gts, threshold) for cfg in configs]
    ranked = sorted(range(len(configs)), key=lambda i: (-scores[i], i))
    best = configs[ranked[0]]
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(best.to_json() + "\n")
    else:
        sys.stdout.write(best.to_json() + "\n")
    if args.leaderboard:
        names = [f.name for f in fields(DetectorConfig)]
        with open(args.leaderboard, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["rank", metric, "grid_index", *names])
            for rank, i in enumerate(ranked, start=1):
                writer.writerow(
                    [rank, repr(scores[i]), i, *(getattr(configs[i], n) for n in names)]
                )
    log.info("best %s = %.4f", metric, scores[ranked[0]])
    return 0


# ----------------------------------------------------------------- parts


def cmd_parts(args) -> int:
    if args.saliency:
        sal = SaliencyMap(read_raster(args.saliency))
    else:
        sal = saliency_from_gradmaps(load_gradient_maps(args.gradmaps))
    sal = sparsify_saliency(sal)
    img = None
    if args.image:
        loaded = read_image(args.image)
        if (loaded.height, loaded.width) != sal.values.shape:
            raise InputError(
                f"{args.image} is {loaded.width}x{loaded.height} but the saliency "
                f"map is {sal.values.shape[1]}x{sal.values.shape[0]}"
            )
        if isinstance(loaded, GrayImage):
            img = ColorImage(np.repeat(loaded.pixels[:, :, None], 3, axis=2))
        else:
            img = loaded
    cfg = PartConfig(k=args.k, peak_min_distance=args.min_distance, use_rgb=img is not None)
    boxes = estimate_parts(sal, img, cfg)
    doc = {"k": args.k, "boxes": [{"x": b.x, "y": b.y, "w": b.w, "h": b.h} for b in boxes]}
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


# ----------------------------------------------------------------- watch


def _manifest_done(manifest_path: str) -> set[str]:
    done: set[str] = set()
    if not os.path.exists(manifest_path):
        return done
    with open(manifest_path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                entry = json.loads(line)
                done.add(entry["source_image"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise InputError(f"{manifest_path}:{line_no}: corrupt manifest line: {exc}")
    return done


def _padded(box: Box, margin: int, width: int, height: int) -> Box:
    x0 = max(0, box.x - margin)
    y0 = max(0, box.y - margin)
    x1 = min(width, box.x + box.w + margin)
    y1 = min(height, box.y + box.h + margin)
    return Box(x0, y0, x1 - x0, y1 - y0)


def _watch_cycle(args, cfg: DetectorConfig, manifest_path: str) -> int:
    done = _manifest_done(manifest_path)
    names = sorted(
        name
        for name in os.listdir(args.in_dir)
        if name.lower().endswith(IMAGE_EXTENSIONS)
        and os.path.isfile(os.path.join(args.in_dir, name))
    )
    processed = 0
    for name in names:
        if name in done:
            continue
        path = os.path.join(args.in_dir, name)
        timestamp = dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")
        entry: dict = {"source_image": name, "timestamp": timestamp}
        try:
            img = read_image(path)
        except InputError as exc:
            log.error("%s", exc)
            entry["error"] = str(exc)
            entry["detections"] = []
        else:
            dets = detect(_grayscale(img), cfg)
            stem = os.path.splitext(name)[0]
            detections = []
            for i, d in enumerate(dets):
                crop_name = f"{stem}_{i}.png"
                padded = _padded(d.box, args.margin, img.width, img.height)
                write_image(crop(img, padded), os.path.join(args.out_dir, crop_name))
                detections.append(
                    {
                        "crop_path": crop_name,
                        "box": {"x": d.box.x, "y": d.box.y, "w": d.box.w, "h": d.box.h},
                        "score": d.score,
                    }
                )
            entry["detections"] = detections
            log.info("%s: %d detections", name, len(dets))
        with open(manifest_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        processed += 1
    return processed


def cmd_watch(args) -> int:
    for d, flag in ((args.in_dir, "--in"), (args.out_dir, "--out")):
        if not os.path.isdir(d):
            raise InputError(f"{flag} directory {d!r} does not exist")
    if args.interval < 0:
        raise InputError("--interval must be >= 0")
    if args.margin < 0:
        raise InputError("--margin must be >= 0")
    cfg = DetectorConfig.load(args.config) if args.config else DetectorConfig()
    manifest_path = os.path.join(args.out_dir, "manifest.jsonl")
    try:
        while True:
            n = _watch_cycle(args, cfg, manifest_path)
            log.debug("cycle processed %d image(s)", n)
            if args.once:
                return 0
            time.sleep(args.interval)
    except KeyboardInterrupt:
        log.info("interrupted; stopping watch")
        return 0


# ----------------------------------------------------------------- stats


def cmd_stats(args) -> int:
    s = stats(load_annotations(args.gt))
    print(f"images    {s['n_images']}")
    print(f"boxes     {s['n_boxes']}")
    print(f"species   {s['n_species']}")
    print("boxes per image:")
    for count, n_images in s["boxes_per_image"].items():
        print(f"  {count:>4} box(es)  {n_images} image(s)")
    print("box area quantiles (px^2):")
    for q, v in s["box_area_quantiles"].items():
        print(f"  p{q:<3} {v:.1f}")
    return 0


# ------------------------------------------------------------------ fuse


def _load_prob_vector(path: str) -> ProbVector:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read probabilities {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc
    if isinstance(doc, dict):
        doc = doc.get("probs")
    if not isinstance(doc, list):
        raise InputError(f"{path}: expected a JSON array (or an object with 'probs')")
    return ProbVector(doc)


def cmd_fuse(args) -> int:
    fused = fuse_geometric(_load_prob_vector(args.p), _load_prob_vector(args.q))
    text = json.dumps([float(v) for v in fused.probs]) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


# ------------------------------------------------------------------ main


def build_parser() -> Parser:
    parser = Parser(prog="mothscan", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mothscan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("detect", help="run the blob detector over image files")
    p.add_argument("images", nargs="+", help="input image files")
    p.add_argument("--config", help="detector config JSON (defaults when omitted)")
    p.add_argument("--out", help="write detections JSON here instead of stdout")
    p.add_argument(
        "--keep-going",
        action="store_true",
        help="skip undecodable images (still exits 1 if any failed)",
    )
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred", required=True, help="predictions JSON (detect output)")
    p.add_argument("--gt", required=True, help="ground-truth annotations JSON")
    p.add_argument("--iou", default="0.50,0.75", help="comma list of IoU thresholds")
    p.add_argument("--out", help="write the full report JSON here")
    p.add_argument("--pr-csv", help="write pooled PR points as CSV here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("tune", help="grid-search detector settings on a labeled split")
    p.add_argument("--images", help="image directory (default: paths relative to --gt)")
    p.add_argument("--gt", required=True, help="ground-truth annotations JSON")
    p.add_argument("--grid", required=True, help="grid JSON: {\"grid\": {field: [values]}}")
    p.add_argument("--metric", help="map@0.50 or map@0.75 (default: grid file, then map@0.50)")
    p.add_argument("--out", help="write the best config JSON here instead of stdout")
    p.add_argument("--leaderboard", help="write every configuration's score as CSV here")
    p.add_argument("--jobs", type=int, default=1, help="evaluate up to N configs in parallel")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("parts", help="estimate part boxes from a saliency source")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--gradmaps", help="gradient-map directory (dims.json + grad_*.bin)")
    group.add_argument("--saliency", help="saliency raster file")
    p.add_argument("--image", help="aligned photo for color features (optional)")
    p.add_argument("--k", type=int, default=4, help="number of parts to estimate")
    p.add_argument("--min-distance", type=float, default=10.0, help="peak separation, px")
    p.add_argument("--out", help="write part boxes JSON here instead of stdout")
    p.set_defaults(func=cmd_parts)

    p = sub.add_parser("watch", help="poll a directory, detect, crop and log to a manifest")
    p.add_argument("--in", dest="in_dir", required=True, help="incoming image directory")
    p.add_argument("--out", dest="out_dir", required=True, help="crop + manifest directory")
    p.add_argument("--config", help="detector config JSON (defaults when omitted)")
    p.add_argument("--interval", type=float, default=120.0, help="poll interval, seconds")
    p.add_argument("--margin", type=int, default=10, help="crop context margin, px")
    p.add_argument("--once", action="store_true", help="run a single poll cycle and exit")
    p.set_defaults(func=cmd_watch)

    p = sub.add_parser("stats", help="print dataset statistics")
    p.add_argument("--gt", required=True, help="annotations JSON")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("fuse", help="geometric-mean fusion of two probability vectors")
    p.add_argument("--p", required=True, help="first probability JSON file")
    p.add_argument("--q", required=True, help="second probability JSON file")
    p.add_argument("--out", help="write fused probabilities here instead of stdout")
    p.set_defaults(func=cmd_fuse)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        _setup_logging()
        args = build_parser().parse_args(argv)
        return args.func(args)
    except InputError as exc:
        print(f"mothscan: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit:
        raise
    except Exception as exc:  # internal fault: stable exit code for scripting
        log.debug("internal error", exc_info=True)
        print(f"mothscan: internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
