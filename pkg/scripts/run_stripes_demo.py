#!/usr/bin/env python3
"""Generate a synthetic striped test image, animate it, and write a GIF.

Usage: python scripts/run_stripes_demo.py [out_dir]
"""

import json
import sys
from pathlib import Path

import numpy as np

from endlessloop.pipeline import ProjectConfig, run_pipeline
from endlessloop.raster import BinaryMask, RasterImage, save_image, save_mask


def make_inputs(out: Path, period=20.0, width=360, height=220):
    xs = np.arange(width, dtype=np.float64)
    v = 0.5 + 0.32 * np.sin(2 * np.pi * xs / period) + 0.13 * np.sin(6 * np.pi * xs / period + 1)
    img = np.stack([v, v * 0.8 + 0.1, v * 0.55 + 0.25], axis=1)
    img = np.repeat(img[None, :, :], height, axis=0)
    image = RasterImage(np.clip(img, 0, 1))
    mask = np.zeros((height, width), bool)
    mask[10:-10, 30:-30] = True
    save_image(out / "stripes.png", image)
    save_mask(out / "stripes_mask.png", BinaryMask(mask))


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_out")
    out.mkdir(parents=True, exist_ok=True)
    make_inputs(out)
    config = ProjectConfig(
        image_path=str(out / "stripes.png"),
        mask_path=str(out / "stripes_mask.png"),
        direction_deg=0.0,
        frame_count=80,
        out_dir=str(out / "frames"),
        gif_path=str(out / "loop.gif"),
        debug_dir=str(out / "debug"),
    )
    seq, diag = run_pipeline(config)
    print(json.dumps({"frames": len(seq), "timings": {k: round(v, 2) for k, v in diag["timings"].items()}}, indent=2))
    print(f"wrote {out / 'loop.gif'}")


if __name__ == "__main__":
    main()
