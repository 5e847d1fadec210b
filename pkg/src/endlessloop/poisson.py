"""Gradient-domain compositing: solve a discrete Poisson equation over a
region so its interior follows the source gradients while the boundary
stays pinned to the destination (red-black Gauss-Seidel iteration).
"""

from __future__ import annotations

import numpy as np


def poisson_blend(
    dest: np.ndarray,
    src: np.ndarray,
    region: np.ndarray,
    tol: float = 1e-4,
    max_iterations: int = 2000,
) -> np.ndarray:
    """Blend src into dest over region; Dirichlet boundary from dest.

    dest/src are (h, w, c); region is (h, w) bool. The guide field is the
    Laplacian of src; iteration stops when the largest per-sweep update
    drops to tol, or at max_iterations.
    """
    if not region.any():
        return dest.copy()
    h, w = region.shape
    ys, xs = np.nonzero(region)
    y0, y1 = max(ys.min() - 1, 0), min(ys.max() + 2, h)
    x0, x1 = max(xs.min() - 1, 0), min(xs.max() + 2, w)
    d = dest[y0:y1, x0:x1].astype(np.float64).copy()
    s = src[y0:y1, x0:x1].astype(np.float64)
    m = region[y0:y1, x0:x1]
    bh, bw = m.shape

    inner = m.copy()
    inner[0, :] = inner[-1, :] = inner[:, 0] = inner[:, -1] = False

    def lap(a: np.ndarray) -> np.ndarray:
        out = np.zeros_like(a)
        out[1:-1, 1:-1] = (
            4.0 * a[1:-1, 1:-1] - a[:-2, 1:-1] - a[2:, 1:-1] - a[1:-1, :-2] - a[1:-1, 2:]
        )
        return out

    b = lap(s)

    yy, xx = np.meshgrid(np.arange(bh), np.arange(bw), indexing="ij")
    red = ((yy + xx) % 2 == 0) & inner
    black = ((yy + xx) % 2 == 1) & inner

    u = np.where(inner[..., None], s, d)
    for _ in range(max_iterations):
        delta = 0.0
        for color in (red, black):
            nb = np.zeros_like(u)
            nb[1:-1, 1:-1] = u[:-2, 1:-1] + u[2:, 1:-1] + u[1:-1, :-2] + u[1:-1, 2:]
            new = (nb + b) / 4.0
            change = np.abs(new[color] - u[color])
            if change.size:
                delta = max(delta, float(change.max()))
            u[color] = new[color]
        if delta <= tol:
            break

    out = dest.astype(np.float64).copy()
    patch = out[y0:y1, x0:x1]
    patch[inner] = u[inner]
    out[y0:y1, x0:x1] = patch
    return out
