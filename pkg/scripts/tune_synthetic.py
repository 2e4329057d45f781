#!/usr/bin/env python3
"""Grid search for detector settings on held-out generated scenes.

The shipped tuned configuration (mothscan.synthetic.tuned_detector_config
and configs/tuned_synthetic.json) came from this search. It tunes on a
scene stream seeded differently from the fixed validation suite, so the
validation scenes stay held out.

Usage:
    python3 scripts/tune_synthetic.py [--scenes 20] [--seed 11] [--jobs 1]
"""

from __future__ import annotations

import argparse
import itertools
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

from mothscan import DetectorConfig, GroundTruthImage, detect, map_at
from mothscan.synthetic import scene_suite

GRID = {
    "blur_radius": [2, 3],
    "morph_open_radius": [1, 2],
    "morph_close_radius": [0, 1, 2],
    "min_area": [40, 60, 80],
}

# Fields outside the grid stay at these values. Recursive splitting is kept
# at one level: the generated scenes enforce ellipse separation, so deeper
# recursion never fires here, and one level bounds work on edge hardware.
BASE = replace(DetectorConfig(), max_recursion=1)


def score_config(cfg, images, gts):
    preds = {image_id: detect(img, cfg) for image_id, img in images.items()}
    report = map_at(preds, gts, [0.5, 0.75])
    return report.per_threshold[0.5], report.per_threshold[0.75]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scenes", type=int, default=20, help="held-out scenes to tune on")
    parser.add_argument("--seed", type=int, default=11, help="scene stream seed")
    parser.add_argument("--jobs", type=int, default=1, help="parallel config evaluations")
    args = parser.parse_args()

    print(f"generating {args.scenes} tuning scenes (seed {args.seed})...", flush=True)
    suite = scene_suite(n_scenes=args.scenes, seed=args.seed)
    images = {f"scene{i:03d}": img for i, (img, _) in enumerate(suite)}
    gts = {
        f"scene{i:03d}": GroundTruthImage(f"scene{i:03d}", tuple(boxes))
        for i, (_, boxes) in enumerate(suite)
    }

    names = list(GRID)
    configs = [
        replace(BASE, **dict(zip(names, combo)))
        for combo in itertools.product(*(GRID[n] for n in names))
    ]
    print(f"scoring {len(configs)} configurations on {len(images)} scenes...", flush=True)

    t0 = time.perf_counter()
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            scores = list(pool.map(lambda c: score_config(c, images, gts), configs))
    else:
        scores = [score_config(cfg, images, gts) for cfg in configs]
    elapsed = time.perf_counter() - t0

    # rank by AP@0.75 (the harder target), AP@0.50 as tie-break, then grid order
    ranked = sorted(
        range(len(configs)), key=lambda i: (-scores[i][1], -scores[i][0], i)
    )
    header = f"{'rank':>4}  {'AP@0.50':>8}  {'AP@0.75':>8}  " + "  ".join(
        f"{n:>{max(len(n), 5)}}" for n in names
    )
    print(header)
    for rank, i in enumerate(ranked, start=1):
        ap50, ap75 = scores[i]
        row = f"{rank:>4}  {ap50:>8.4f}  {ap75:>8.4f}  " + "  ".join(
            f"{getattr(configs[i], n):>{max(len(n), 5)}}" for n in names
        )
        print(row)

    # several min_area values usually tie at the top (the scenes are clean
    # enough that any of them removes the noise components); ship the median
    # of the tied values for headroom against unseen speckle on both sides
    top = scores[ranked[0]]
    tied = [i for i in ranked if scores[i] == top]
    tied.sort(key=lambda i: configs[i].min_area)
    best = configs[tied[len(tied) // 2]]
    if len(tied) > 1:
        print(f"\n{len(tied)} configurations tie at the top; picking the median min_area")
    print(f"\nsearch took {elapsed:.1f}s; selected configuration:")
    print(best.to_json())
    return 0


if __name__ == "__main__":
    sys.exit(main())
