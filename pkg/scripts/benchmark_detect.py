#!/usr/bin/env python3
"""Timing and memory report for detection on a 20-megapixel synthetic image.

Times an untraced run, then repeats it under tracemalloc for the
allocation high-water mark. The traced peak excludes the decoded image
itself (tracing starts after it exists), so total memory is the peak
plus one image: a traced peak under 3x the image size means the whole
run stays under 4x the decoded size.

Usage:
    python3 scripts/benchmark_detect.py [--pixels 20000000] [--runs 3]
"""

from __future__ import annotations

import argparse
import gc
import sys
import time
import tracemalloc

from mothscan.synthetic import performance_image, tuned_detector_config
from mothscan import detect


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--pixels", type=int, default=20_000_000)
    parser.add_argument("--runs", type=int, default=3, help="timed runs (best is reported)")
    args = parser.parse_args()

    print(f"rendering a {args.pixels / 1e6:.0f}-megapixel scene...", flush=True)
    img = performance_image(args.pixels)
    cfg = tuned_detector_config()
    image_bytes = img.pixels.nbytes
    print(f"image: {img.width}x{img.height}, {image_bytes / 2**20:.1f} MiB decoded")

    times = []
    for run in range(args.runs):
        gc.collect()
        t0 = time.perf_counter()
        dets = detect(img, cfg)
        times.append(time.perf_counter() - t0)
        print(f"run {run + 1}: {times[-1]:.3f}s, {len(dets)} detections", flush=True)

    gc.collect()
    tracemalloc.start()
    detect(img, cfg)
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()

    print(f"\nbest time     : {min(times):.3f}s  (budget 2.0s)")
    print(f"traced peak   : {peak / 2**20:.1f} MiB  (budget {3 * image_bytes / 2**20:.1f} MiB = 3x image)")
    print(f"peak + image  : {(peak + image_bytes) / 2**20:.1f} MiB  (budget {4 * image_bytes / 2**20:.1f} MiB = 4x decoded)")
    ok = min(times) < 2.0 and peak < 3 * image_bytes
    print("within budget : " + ("yes" if ok else "NO"))
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
