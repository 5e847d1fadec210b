"""Repetition detection along a sampled line via dynamic programming.

The band slice becomes a self-similarity matrix with an infinite-cost band
around the main diagonal (half-width e) so the trivial zero-motion match is
infeasible. The matrix is extended by reflecting the column sequence about
its ends, and a minimal-cost monotone 8-connected path — not allowed to stay
on one row or column for more than two entries — is traced from the
top-left corner region to the bottom/right edge. Offsets of the path from
the main diagonal, collected over the middle of the extended traversal,
seed the displacement labels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import BandSlice

DIAG, DOWN, RIGHT = 0, 1, 2
_START = 3


class RepetitionError(Exception):
    """Raised when no usable repetition can be extracted from a slice."""


@dataclass(frozen=True)
class SelfSimMatrix:
    """Pairwise column distances with a sentinel band |i-j| <= e.

    values stays finite: the sentinel is n * max_finite + 1. feasible() tells
    which cells a path may occupy.
    """

    values: np.ndarray
    exclusion: int

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def sentinel(self) -> float:
        return float(self.values.max())

    def feasible(self) -> np.ndarray:
        n = self.n
        idx = np.arange(n)
        return np.abs(idx[:, None] - idx[None, :]) > self.exclusion


@dataclass(frozen=True)
class MatchPath:
    """Monotone 8-connected index pairs with the bounded-slope property."""

    points: np.ndarray  # (k, 2) int, columns (i, j)
    total_cost: float

    def offsets(self) -> np.ndarray:
        return self.points[:, 1] - self.points[:, 0]


@dataclass(frozen=True)
class OffsetSeedSet:
    """Signed path offsets (multiset) plus the direction they live on."""

    offsets: np.ndarray  # (k,) int, |offset| > e, duplicates kept
    direction: tuple[float, float]

    @property
    def dominant_sign(self) -> int:
        pos = int(np.sum(self.offsets > 0))
        neg = int(np.sum(self.offsets < 0))
        return 1 if pos >= neg else -1

    def lengths_by_frequency(self) -> list[tuple[int, int]]:
        """Distinct |offset| values with counts, most frequent first."""
        mags, counts = np.unique(np.abs(self.offsets), return_counts=True)
        order = np.lexsort((mags, -counts))
        return [(int(mags[k]), int(counts[k])) for k in order]


def reflect_index(k: int, n: int) -> int:
    """Triangle-wave reflection of index k about the ends of 0..n-1."""
    period = 2 * n - 2
    k = k % period
    return k if k < n else period - k


def build_selfsim(slice_: BandSlice, e: int = 8) -> SelfSimMatrix:
    """L2 distances between band columns; cells |i-j| <= e get the sentinel."""
    n = slice_.n
    if n < 2 * e + 2:
        raise RepetitionError(f"slice too short: {n} columns, need >= {2 * e + 2}")
    cols = slice_.columns.astype(np.float64)
    sq = (cols * cols).sum(axis=1)
    gram = cols @ cols.T
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * gram, 0.0)
    values = np.sqrt(d2)
    idx = np.arange(n)
    band = np.abs(idx[:, None] - idx[None, :]) <= e
    max_finite = values[~band].max() if (~band).any() else 0.0
    sentinel = n * max_finite + 1.0
    values[band] = sentinel
    return SelfSimMatrix(values=values, exclusion=e)


def extend_by_reflection(matrix: SelfSimMatrix) -> SelfSimMatrix:
    """Cover a doubled traversal (length 2n-1) by reflecting indices."""
    n = matrix.n
    e = matrix.exclusion
    r = np.fromiter((reflect_index(k, n) for k in range(2 * n - 1)), dtype=np.intp)
    ext = matrix.values[np.ix_(r, r)].copy()
    m = ext.shape[0]
    idx = np.arange(m)
    band = np.abs(idx[:, None] - idx[None, :]) <= e
    finite = ext[~band]
    sentinel = m * (finite.max() if finite.size else 0.0) + 1.0
    ext[band] = sentinel
    return SelfSimMatrix(values=ext, exclusion=e)


def min_cost_path(matrix: SelfSimMatrix) -> MatchPath:
    """Minimal-cost feasible path from the top-left corner region.

    Starts at (0, e+1) or (e+1, 0); ends anywhere feasible on the last row
    or column. Per-cell bookkeeping keeps the cheapest cost of arriving by
    each of the three step directions so the bounded-slope rule is exact.
    Ties prefer a diagonal step, then down, then right.
    """
    n = matrix.n
    e = matrix.exclusion
    feas = matrix.feasible()
    D = np.where(feas, matrix.values, np.inf)

    INF = np.inf
    cost = np.full((3, n, n), INF)
    choice = np.full((3, n, n), -1, dtype=np.int8)
    starts = [(0, e + 1), (e + 1, 0)]

    for i in range(n):
        if i > 0:
            # diagonal arrival from (i-1, j-1); any predecessor state
            prev = cost[:, i - 1, :-1]
            arg = prev.argmin(axis=0)  # argmin picks diag first on ties
            cost[DIAG, i, 1:] = D[i, 1:] + np.take_along_axis(prev, arg[None, :], 0)[0]
            choice[DIAG, i, 1:] = arg
            # down arrival from (i-1, j); predecessor must not be a down step
            prev2 = cost[[DIAG, RIGHT], i - 1, :]
            arg2 = prev2.argmin(axis=0)
            cost[DOWN, i, :] = D[i, :] + np.take_along_axis(prev2, arg2[None, :], 0)[0]
            choice[DOWN, i, :] = np.where(arg2 == 0, DIAG, RIGHT)
        for si, sj in starts:
            if si == i and feas[si, sj] and D[si, sj] < cost[DIAG, si, sj]:
                cost[DIAG, si, sj] = D[si, sj]
                choice[DIAG, si, sj] = _START
        # right arrival from (i, j-1); predecessor must not be a right step.
        # Right steps never chain, so the same-row diag/down states are final.
        prev3 = cost[[DIAG, DOWN], i, :-1]
        arg3 = prev3.argmin(axis=0)
        new = D[i, 1:] + np.take_along_axis(prev3, arg3[None, :], 0)[0]
        upd = new < cost[RIGHT, i, 1:]
        cost[RIGHT, i, 1:] = np.where(upd, new, cost[RIGHT, i, 1:])
        choice[RIGHT, i, 1:] = np.where(upd, np.where(arg3 == 0, DIAG, DOWN), choice[RIGHT, i, 1:])

    # terminal selection: last row or column, feasible, deterministic order
    best = None
    for i in range(n):
        js = [n - 1] if i < n - 1 else list(range(n))
        for j in js:
            if not feas[i, j]:
                continue
            for s in (DIAG, DOWN, RIGHT):
                c = cost[s, i, j]
                if np.isfinite(c) and (best is None or c < best[0] - 1e-12):
                    best = (c, i, j, s)
    if best is None:
        raise RepetitionError("no feasible match path exists")

    total, i, j, s = best
    points = [(i, j)]
    while choice[s, i, j] != _START:
        ps = choice[s, i, j]
        if s == DIAG:
            i, j = i - 1, j - 1
        elif s == DOWN:
            i -= 1
        else:
            j -= 1
        s = ps
        points.append((i, j))
    points.reverse()
    return MatchPath(points=np.asarray(points, dtype=np.int64), total_cost=float(total))


def path_to_offsets(
    path: MatchPath, n: int, direction: tuple[float, float]
) -> OffsetSeedSet:
    """Collect diagonal offsets from the middle of an extended-matrix path.

    Keeps points whose indices both lie in [n/2, 3n/2) and that do not
    straddle the reflection fold at index n-1 (a straddling pair matches a
    position against its own mirror image and carries no usable offset).
    Duplicates are kept so downstream histograms can weight by frequency.
    """
    lo, hi = n // 2, (3 * n) // 2
    fold = n - 1
    pts = path.points
    keep = (
        (pts[:, 0] >= lo)
        & (pts[:, 0] < hi)
        & (pts[:, 1] >= lo)
        & (pts[:, 1] < hi)
        & ((pts[:, 1] <= fold) | (pts[:, 0] >= fold))
    )
    offsets = (pts[keep, 1] - pts[keep, 0]).astype(np.int64)
    if offsets.size == 0:
        raise RepetitionError("no path points in the middle window; repetition not found")
    return OffsetSeedSet(offsets=offsets, direction=direction)


def line_offsets(path: MatchPath, n: int) -> np.ndarray:
    """Per-position offsets along the original line, NaN where unsampled.

    Each middle-window path point contributes its offset at position
    reflect(i); multiple contributions average, gaps fill from the nearest
    sampled position.
    """
    lo, hi = n // 2, (3 * n) // 2
    fold = n - 1
    sums = np.zeros(n)
    counts = np.zeros(n)
    for i, j in path.points:
        if lo <= i < hi and lo <= j < hi and (j <= fold or i >= fold):
            pos = reflect_index(int(i), n)
            sums[pos] += j - i
            counts[pos] += 1
    out = np.full(n, np.nan)
    has = counts > 0
    if not has.any():
        raise RepetitionError("no path points in the middle window; repetition not found")
    out[has] = sums[has] / counts[has]
    # nearest-neighbor fill along the line
    known = np.nonzero(has)[0]
    missing = np.nonzero(~has)[0]
    if missing.size:
        nearest = known[np.argmin(np.abs(missing[:, None] - known[None, :]), axis=1)]
        out[missing] = out[nearest]
    return out


def detect_repetition(slice_: BandSlice, e: int = 8):
    """Full chain: self-similarity, reflect, path, seed offsets.

    Returns (matrix, extended, path, seeds, per_line_offsets).
    """
    matrix = build_selfsim(slice_, e)
    extended = extend_by_reflection(matrix)
    path = min_cost_path(extended)
    seeds = path_to_offsets(path, matrix.n, slice_.direction)
    per_line = line_offsets(path, matrix.n)
    return matrix, extended, path, seeds, per_line
