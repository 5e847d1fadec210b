"""Suggest candidate motion directions from the image alone.

Corner points (minimum eigenvalue of the gradient structure tensor) are
matched as mutual nearest neighbors in descriptor space; each matched pair
votes for the direction of its offset folded to [0, 180). Peaks of the vote
histogram, suppressed one bin to each side between rounds, become up to
three suggested unit directions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .descriptors import DescriptorField
from .raster import RasterImage

BIN_DEG = 10.0
MIN_VOTES = 3.0
NMS_RADIUS = 8


@dataclass(frozen=True)
class CornerSet:
    points: np.ndarray  # (k, 2) int, (x, y), scores descending
    scores: np.ndarray  # (k,)

    @property
    def count(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class DirectionVote:
    pairs: np.ndarray  # (p, 2) corner indices
    histogram: np.ndarray  # (18,) smeared votes
    winners: list[tuple[float, float, float]]  # (x, y, votes)


def detect_corners(image: RasterImage, n: int = 200, window_sigma: float = 1.5) -> CornerSet:
    """Top-n corners by the structure tensor's smaller eigenvalue.

    Non-maximum suppression within NMS_RADIUS px, then a greedy pass keeps
    the strongest ones at pairwise spacing > NMS_RADIUS.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    gray = image.data.mean(axis=2)
    gx = ndimage.sobel(gray, axis=1, mode="reflect") / 8.0
    gy = ndimage.sobel(gray, axis=0, mode="reflect") / 8.0
    ixx = ndimage.gaussian_filter(gx * gx, window_sigma, mode="reflect")
    iyy = ndimage.gaussian_filter(gy * gy, window_sigma, mode="reflect")
    ixy = ndimage.gaussian_filter(gx * gy, window_sigma, mode="reflect")
    tr = (ixx + iyy) / 2.0
    det = np.sqrt(np.maximum(((ixx - iyy) / 2.0) ** 2 + ixy**2, 0.0))
    lam_min = tr - det

    size = 2 * NMS_RADIUS + 1
    local_max = lam_min == ndimage.maximum_filter(lam_min, size=size, mode="constant")
    candidates = local_max & (lam_min > 1e-9)
    ys, xs = np.nonzero(candidates)
    if ys.size == 0:
        return CornerSet(points=np.zeros((0, 2), int), scores=np.zeros(0))
    scores = lam_min[ys, xs]
    order = np.lexsort((xs, ys, -scores))
    ys, xs, scores = ys[order], xs[order], scores[order]
    kept: list[int] = []
    for k in range(ys.size):
        ok = True
        for m in kept:
            if (xs[k] - xs[m]) ** 2 + (ys[k] - ys[m]) ** 2 < NMS_RADIUS**2:
                ok = False
                break
        if ok:
            kept.append(k)
            if len(kept) >= n:
                break
    pts = np.stack([xs[kept], ys[kept]], axis=1).astype(np.int64)
    return CornerSet(points=pts, scores=scores[kept])


def best_buddies(corners: CornerSet, descriptors: DescriptorField) -> np.ndarray:
    """Mutual nearest-neighbor corner pairs in descriptor space.

    Returns (p, 2) index pairs, each unordered pair once (a < b). Distance
    ties resolve to the lowest corner index.
    """
    if corners.count < 2:
        raise ValueError("need at least two corners")
    pts = corners.points
    feats = descriptors.data[pts[:, 1], pts[:, 0]].astype(np.float64)
    sq = (feats * feats).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (feats @ feats.T)
    np.fill_diagonal(d2, np.inf)
    nn = d2.argmin(axis=1)  # argmin takes the lowest index on ties
    pairs = [(a, int(nn[a])) for a in range(len(nn)) if nn[nn[a]] == a and a < nn[a]]
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2)


def vote_directions(
    pairs: np.ndarray, corners: CornerSet, max_dirs: int = 3
) -> DirectionVote:
    """Histogram pair-offset directions and pick up to max_dirs winners.

    Votes fold to [0, 180); each vote adds 1 to its bin and 0.5 to both
    neighbors (wrapping, since 180 folds onto 0). After a winner, its bin
    and both neighbors are zeroed. Rounds stop when the best bin has fewer
    than MIN_VOTES votes. Winners are unit vectors at bin-center angles,
    signed so x > 0 (or y > 0 when x == 0).
    """
    if pairs.shape[0] < 1:
        raise ValueError("need at least one pair")
    nbins = int(round(180.0 / BIN_DEG))
    offs = corners.points[pairs[:, 1]] - corners.points[pairs[:, 0]]
    ang = np.degrees(np.arctan2(offs[:, 1], offs[:, 0])) % 180.0
    bins = (ang // BIN_DEG).astype(int) % nbins
    hist = np.zeros(nbins)
    np.add.at(hist, bins, 1.0)
    np.add.at(hist, (bins + 1) % nbins, 0.5)
    np.add.at(hist, (bins - 1) % nbins, 0.5)

    winners: list[tuple[float, float, float]] = []
    work = hist.copy()
    for _ in range(max_dirs):
        b = int(np.argmax(work))
        votes = work[b]
        if votes < MIN_VOTES:
            break
        theta = np.deg2rad((b + 0.5) * BIN_DEG)
        vx, vy = float(np.cos(theta)), float(np.sin(theta))
        if vx < -1e-12 or (abs(vx) <= 1e-12 and vy < 0):
            vx, vy = -vx, -vy
        winners.append((vx, vy, float(votes)))
        work[[b, (b + 1) % nbins, (b - 1) % nbins]] = 0.0
    return DirectionVote(pairs=pairs, histogram=hist, winners=winners)


def suggest_directions(
    image: RasterImage, descriptors: DescriptorField, n_corners: int = 200, max_dirs: int = 3
) -> list[tuple[float, float, float]]:
    """Corner detection, best-buddy matching and voting in one call."""
    corners = detect_corners(image, n=n_corners)
    if corners.count < 2:
        return []
    pairs = best_buddies(corners, descriptors)
    if pairs.shape[0] == 0:
        return []
    return vote_directions(pairs, corners, max_dirs=max_dirs).winners
