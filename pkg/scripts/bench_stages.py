#!/usr/bin/env python3
"""Time each pipeline stage on the synthetic stripes case.

Usage: python scripts/bench_stages.py [--workers N] [--repeats K]
"""

import argparse
import statistics
import tempfile
from pathlib import Path

import numpy as np

from endlessloop.pipeline import ProjectConfig, run_pipeline
from endlessloop.raster import BinaryMask, RasterImage, save_image, save_mask


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    tmp = Path(tempfile.mkdtemp(prefix="bench_"))
    xs = np.arange(360, dtype=np.float64)
    v = 0.5 + 0.32 * np.sin(2 * np.pi * xs / 20) + 0.13 * np.sin(6 * np.pi * xs / 20 + 1)
    img = np.repeat(np.stack([v, v * 0.8 + 0.1, v * 0.55 + 0.25], axis=1)[None], 220, axis=0)
    save_image(tmp / "i.png", RasterImage(np.clip(img, 0, 1)))
    mask = np.zeros((220, 360), bool)
    mask[10:-10, 30:-30] = True
    save_mask(tmp / "m.png", BinaryMask(mask))

    rows = []
    for _ in range(args.repeats):
        config = ProjectConfig(
            image_path=str(tmp / "i.png"), mask_path=str(tmp / "m.png"),
            direction_deg=0.0, frame_count=80, workers=args.workers,
        )
        _, diag = run_pipeline(config)
        rows.append(diag["timings"])

    stages = [k for k in rows[0] if k != "total"] + ["total"]
    print(f"{'stage':12s} {'median s':>9s}")
    for stage in stages:
        med = statistics.median(r[stage] for r in rows)
        print(f"{stage:12s} {med:9.3f}")


if __name__ == "__main__":
    main()
