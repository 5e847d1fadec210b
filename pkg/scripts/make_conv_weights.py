#!/usr/bin/env python3
"""Write a small random conv-weights file for the conv descriptor backend.

The file format carries two stacked 3x3 conv layers; any pretrained
first-two-layer filters can be exported into it. This script emits random
orthogonal-ish filters, useful for exercising the backend without
distributing pretrained weights.

Usage: python scripts/make_conv_weights.py out.elcw [--channels 64]
"""

import argparse

import numpy as np

from endlessloop.descriptors import ConvLayer, save_conv_weights


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out")
    ap.add_argument("--channels", type=int, default=64)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    c = args.channels
    w1 = rng.standard_normal((c, 3, 3, 3)) / np.sqrt(27)
    w2 = rng.standard_normal((c, c, 3, 3)) / np.sqrt(9 * c)
    layers = [
        ConvLayer(w1, np.zeros(c)),
        ConvLayer(w2, np.zeros(c)),
    ]
    save_conv_weights(args.out, layers)
    print(f"wrote {args.out}: 3->{c}->{c}, descriptor dim {2 * c}")


if __name__ == "__main__":
    main()
