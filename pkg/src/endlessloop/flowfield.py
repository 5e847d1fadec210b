"""From noisy per-pixel labels to smooth, approximately inverse flow fields.

The label field is blurred inside the mask, subsampled to anchor points,
optionally ringed with zero-displacement anchors outside the mask boundary
(soft mode), and densified with a polyharmonic spline (kernel phi(r) = r
plus an affine term, solved per component). The inverse field densifies the
inverted anchor set instead of inverting the dense field, which avoids
holes and collisions.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .crf import LabelAssignment, LabelSet
from .raster import BinaryMask, VectorField, gaussian_blur

ELFF_MAGIC = b"ELFF"


class FlowError(Exception):
    pass


@dataclass(frozen=True)
class SparseFlow:
    """Anchored displacement samples; kind is 'motion' or 'zero' per anchor."""

    positions: np.ndarray  # (A, 2) float, (x, y)
    vectors: np.ndarray  # (A, 2) float
    kinds: tuple[str, ...]

    def __post_init__(self):
        if self.positions.shape != self.vectors.shape:
            raise FlowError("positions and vectors must align")

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    def concat(self, other: "SparseFlow") -> "SparseFlow":
        return SparseFlow(
            positions=np.vstack([self.positions, other.positions]),
            vectors=np.vstack([self.vectors, other.vectors]),
            kinds=self.kinds + other.kinds,
        )


def _eval_chunk(p: np.ndarray, anchors: np.ndarray, weights: np.ndarray,
                affine: np.ndarray) -> np.ndarray:
    from scipy.spatial.distance import cdist

    r = cdist(p, anchors)  # exact at anchors, single C-side temporary
    vals = r @ weights
    vals += affine[0][None, :]
    vals += p[:, :1] * affine[1][None, :]
    vals += p[:, 1:2] * affine[2][None, :]
    return vals


@dataclass(frozen=True)
class RbfModel:
    """Solved polyharmonic interpolant: phi(r) = r plus an affine polynomial."""

    anchors: np.ndarray  # (A, 2)
    weights: np.ndarray  # (A, 2) kernel weights per component
    affine: np.ndarray  # (3, 2) rows are [1, x, y] coefficients per component

    def evaluate(self, xs: np.ndarray, ys: np.ndarray, procs: int = 1) -> np.ndarray:
        """Evaluate at coordinate arrays; returns (..., 2).

        Distances are computed from direct coordinate differences (exact at
        the anchors) in fixed-size chunks so dense grids keep a bounded
        working set. Chunk boundaries are constant, so the result is
        bit-identical whatever `procs` is.
        """
        pts = np.stack([xs.ravel(), ys.ravel()], axis=1)
        chunk = 16384
        starts = list(range(0, pts.shape[0], chunk))
        out = np.empty((pts.shape[0], 2))
        if procs > 1 and len(starts) >= 4:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=procs) as pool:
                chunks = [pts[s : s + chunk] for s in starts]
                results = pool.map(
                    lambda p: _eval_chunk(p, self.anchors, self.weights, self.affine), chunks
                )
                for s, vals in zip(starts, results):
                    out[s : s + chunk] = vals
        else:
            for s in starts:
                out[s : s + chunk] = _eval_chunk(
                    pts[s : s + chunk], self.anchors, self.weights, self.affine
                )
        return out.reshape(xs.shape + (2,))


@dataclass(frozen=True)
class DirectionStroke:
    """User-drawn polyline guiding motion direction."""

    points: np.ndarray  # (k, 2) float, (x, y)

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] < 2 or p.shape[1] != 2:
            raise FlowError("a stroke needs at least two 2D points")
        if np.any(np.all(np.abs(np.diff(p, axis=0)) < 1e-12, axis=1)):
            raise FlowError("consecutive stroke points must be distinct")
        object.__setattr__(self, "points", p)


def raw_field(assignment: LabelAssignment, labels: LabelSet, mask: BinaryMask) -> VectorField:
    """Materialize the label assignment: label vector inside, zero outside."""
    h, w = mask.data.shape
    out = np.zeros((h, w, 2), dtype=np.float64)
    ys, xs = np.nonzero(mask.data)
    if ys.size:
        out[ys, xs] = labels.vectors[assignment.indices[ys, xs]]
    return VectorField(out)


def sparsify(
    field: VectorField, mask: BinaryMask, sigma: float = 6.0, grid_step: int = 8
) -> SparseFlow:
    """Masked blur then grid subsampling; falls back to the mask centroid."""
    if grid_step < 1:
        raise FlowError("grid_step must be >= 1")
    smooth = gaussian_blur(field.data, sigma, support_mask=mask.data)
    h, w = mask.data.shape
    off = grid_step // 2
    gy = np.arange(off, h, grid_step)
    gx = np.arange(off, w, grid_step)
    xx, yy = np.meshgrid(gx, gy)
    keep = mask.data[yy, xx]
    pos = np.stack([xx[keep], yy[keep]], axis=1).astype(np.float64)
    if pos.shape[0] == 0:
        ys, xs = np.nonzero(mask.data)
        if ys.size == 0:
            raise FlowError("cannot sparsify an empty mask")
        cx, cy = xs.mean(), ys.mean()
        k = np.argmin((xs - cx) ** 2 + (ys - cy) ** 2)
        pos = np.array([[xs[k], ys[k]]], dtype=np.float64)
    vec = smooth[pos[:, 1].astype(int), pos[:, 0].astype(int)]
    return SparseFlow(positions=pos, vectors=vec.copy(), kinds=("motion",) * pos.shape[0])


def invert_sparse(flow: SparseFlow) -> SparseFlow:
    """Map each motion anchor (p, v) to (p+v, -v); zero anchors self-invert.

    Inverse positions landing within 1 px of an already-kept anchor merge
    into it by running mean (positions and vectors both averaged).
    """
    motion = np.array([k != "zero" for k in flow.kinds])
    inv_pos = np.where(motion[:, None], flow.positions + flow.vectors, flow.positions)
    if flow.count > 1:
        from scipy.spatial import cKDTree

        dists, _ = cKDTree(inv_pos).query(inv_pos, k=2)
        if dists[:, 1].min() >= 1.0:  # no collisions: skip the merge loop
            return SparseFlow(
                positions=inv_pos,
                vectors=np.where(motion[:, None], -flow.vectors, flow.vectors),
                kinds=flow.kinds,
            )
    pos_out: list[np.ndarray] = []
    vec_out: list[np.ndarray] = []
    kind_out: list[str] = []
    counts: list[int] = []
    for k in range(flow.count):
        p = flow.positions[k]
        v = flow.vectors[k]
        if flow.kinds[k] == "zero":
            np_, nv = p, v
        else:
            np_, nv = p + v, -v
        merged = False
        for m in range(len(pos_out)):
            if np.hypot(*(pos_out[m] - np_)) < 1.0:
                c = counts[m]
                pos_out[m] = (pos_out[m] * c + np_) / (c + 1)
                vec_out[m] = (vec_out[m] * c + nv) / (c + 1)
                counts[m] = c + 1
                merged = True
                break
        if not merged:
            pos_out.append(np_.astype(np.float64))
            vec_out.append(nv.astype(np.float64))
            kind_out.append(flow.kinds[k])
            counts.append(1)
    return SparseFlow(
        positions=np.asarray(pos_out), vectors=np.asarray(vec_out), kinds=tuple(kind_out)
    )


def fit_rbf(flow: SparseFlow) -> RbfModel:
    """Solve the polyharmonic interpolation system for both components.

    Includes the affine polynomial block when the anchors span the plane;
    for collinear anchors the polynomial reduces to a constant, for a single
    anchor to the anchor value itself. Duplicate anchors trigger one 0.5 px
    jitter retry before failing.
    """
    pos = flow.positions.astype(np.float64)
    vec = flow.vectors.astype(np.float64)
    a = pos.shape[0]
    if a == 0:
        raise FlowError("cannot fit a field with no anchors")
    if a == 1:
        affine = np.zeros((3, 2))
        affine[0] = vec[0]
        return RbfModel(anchors=pos, weights=np.zeros((1, 2)), affine=affine)

    centered = pos - pos.mean(axis=0)
    rank = np.linalg.matrix_rank(centered, tol=1e-8)
    poly_cols = 3 if rank >= 2 else 1

    def solve(positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        r = np.sqrt(((positions[:, None, :] - positions[None, :, :]) ** 2).sum(axis=2))
        p = np.ones((a, poly_cols))
        if poly_cols == 3:
            p[:, 1] = positions[:, 0]
            p[:, 2] = positions[:, 1]
        sys = np.zeros((a + poly_cols, a + poly_cols))
        sys[:a, :a] = r
        sys[:a, a:] = p
        sys[a:, :a] = p.T
        rhs = np.zeros((a + poly_cols, 2))
        rhs[:a] = vec
        sol = np.linalg.solve(sys, rhs)
        resid = np.abs(sys @ sol - rhs).max() / max(1.0, np.abs(vec).max())
        if not np.isfinite(sol).all() or resid > 1e-8:
            raise np.linalg.LinAlgError("poorly conditioned interpolation system")
        return sol[:a], sol[a:]

    try:
        weights, poly = solve(pos)
        anchors = pos
    except np.linalg.LinAlgError:
        rng = np.random.default_rng(0)
        jitter = pos + 0.5 * (rng.random(pos.shape) - 0.5)
        weights, poly = solve(jitter)
        anchors = jitter

    affine = np.zeros((3, 2))
    affine[:poly_cols] = poly
    return RbfModel(anchors=anchors, weights=weights, affine=affine)


def rbf_densify(
    flow: SparseFlow, width: int, height: int, procs: int = 1
) -> tuple[VectorField, RbfModel]:
    model = fit_rbf(flow)
    xs, ys = np.meshgrid(
        np.arange(width, dtype=np.float64), np.arange(height, dtype=np.float64)
    )
    return VectorField(model.evaluate(xs, ys, procs=procs)), model


def add_attenuation_anchors(
    flow: SparseFlow, mask: BinaryMask, spacing: int = 12
) -> SparseFlow:
    """Ring the mask with zero anchors so motion fades toward the boundary.

    Anchors sit on the contour of the mask dilated by `spacing`, thinned to
    a minimum spacing of `spacing` px, clipped to the image bounds.
    """
    dist = ndimage.distance_transform_edt(~mask.data)
    dilated = dist <= spacing
    eroded = ndimage.binary_erosion(dilated, np.ones((3, 3), bool), border_value=0)
    contour = dilated & ~eroded
    ys, xs = np.nonzero(contour)
    if ys.size == 0:
        return flow
    kept: list[tuple[float, float]] = []
    for y, x in zip(ys, xs):  # raster order keeps this deterministic
        if all((x - kx) ** 2 + (y - ky) ** 2 >= spacing * spacing for kx, ky in kept):
            kept.append((float(x), float(y)))
    ring = SparseFlow(
        positions=np.asarray(kept, dtype=np.float64),
        vectors=np.zeros((len(kept), 2)),
        kinds=("zero",) * len(kept),
    )
    return flow.concat(ring)


def stroke_sites(
    strokes: list[DirectionStroke], bend_threshold_deg: float = 20.0
) -> list[tuple[np.ndarray, np.ndarray]]:
    """(midpoint, unit direction) per straight-enough stroke piece.

    Strokes are cut wherever consecutive segments turn by more than the
    threshold; each resulting run contributes one site at its half-arc-length
    point, directed from its first point to its last.
    """
    sites = []
    for stroke in strokes:
        pts = stroke.points
        segs = np.diff(pts, axis=0)
        seg_dirs = segs / np.linalg.norm(segs, axis=1, keepdims=True)
        cuts = [0]
        for k in range(len(segs) - 1):
            cosang = np.clip(np.dot(seg_dirs[k], seg_dirs[k + 1]), -1.0, 1.0)
            if np.degrees(np.arccos(cosang)) > bend_threshold_deg:
                cuts.append(k + 1)
        cuts.append(len(segs))
        for s, e in zip(cuts[:-1], cuts[1:]):
            run = pts[s : e + 1]
            seglen = np.linalg.norm(np.diff(run, axis=0), axis=1)
            total = seglen.sum()
            half = total / 2.0
            acc = 0.0
            mid = run[0]
            for k, sl in enumerate(seglen):
                if acc + sl >= half:
                    t = (half - acc) / sl
                    mid = run[k] * (1 - t) + run[k + 1] * t
                    break
                acc += sl
            direction = run[-1] - run[0]
            nrm = np.linalg.norm(direction)
            if nrm < 1e-9:
                direction = segs[s]
                nrm = np.linalg.norm(direction)
            sites.append((np.asarray(mid, dtype=np.float64), direction / nrm))
    return sites


def split_by_strokes(
    mask: BinaryMask, strokes: list[DirectionStroke], bend_threshold_deg: float = 20.0
) -> list[tuple[BinaryMask, np.ndarray, np.ndarray]]:
    """Voronoi cells of the mask around stroke sites.

    Returns (cell mask, direction, site midpoint) per non-empty cell.
    """
    if not strokes:
        raise FlowError("at least one stroke is required")
    sites = stroke_sites(strokes, bend_threshold_deg)
    ys, xs = np.nonzero(mask.data)
    if ys.size == 0:
        return []
    mids = np.stack([m for m, _ in sites], axis=0)
    d2 = (xs[:, None] - mids[None, :, 0]) ** 2 + (ys[:, None] - mids[None, :, 1]) ** 2
    owner = np.argmin(d2, axis=1)
    cells = []
    for k, (mid, direction) in enumerate(sites):
        sel = owner == k
        if not sel.any():
            continue
        cell = np.zeros_like(mask.data)
        cell[ys[sel], xs[sel]] = True
        cells.append((BinaryMask(cell), direction, mid))
    return cells


def merge_cells(
    cell_flows: list[SparseFlow], width: int, height: int, procs: int = 1
) -> tuple[VectorField, VectorField, RbfModel, RbfModel]:
    """Concatenate per-cell anchors; densify forward and inverted sets."""
    if not cell_flows:
        raise FlowError("no cell flows to merge")
    merged = cell_flows[0]
    for extra in cell_flows[1:]:
        merged = merged.concat(extra)
    f1, m1 = rbf_densify(merged, width, height, procs=procs)
    f2, m2 = rbf_densify(invert_sparse(merged), width, height, procs=procs)
    return f1, f2, m1, m2


# ---------------------------------------------------------------------------
# export


def write_flow_binary(path, field: VectorField) -> None:
    """Raw float32 flow dump: magic, width, height, then dx,dy row-major."""
    h, w = field.data.shape[:2]
    with open(path, "wb") as f:
        f.write(ELFF_MAGIC)
        f.write(struct.pack("<II", w, h))
        f.write(field.data.astype("<f4").tobytes())


def read_flow_binary(path) -> VectorField:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != ELFF_MAGIC:
        raise FlowError("not a flow binary")
    w, h = struct.unpack_from("<II", blob, 4)
    data = np.frombuffer(blob, dtype="<f4", count=h * w * 2, offset=12)
    return VectorField(data.reshape(h, w, 2).astype(np.float64))


def flow_to_hsv_rgb(field: VectorField) -> np.ndarray:
    """HSV flow visualization (hue angle, value magnitude) as an RGB array."""
    dx = field.data[..., 0]
    dy = field.data[..., 1]
    mag = np.hypot(dx, dy)
    hue = (np.arctan2(dy, dx) + np.pi) / (2 * np.pi)
    vmax = mag.max() if mag.max() > 0 else 1.0
    val = mag / vmax
    # saturation fixed at 1: rgb = val * channel ramp of the hue wheel
    hp = (hue * 6.0) % 6.0
    x = val * (1.0 - np.abs(hp % 2 - 1.0))
    zeros = np.zeros_like(val)
    sector = hp.astype(int) % 6
    r = np.select([sector == 0, sector == 1, sector == 2, sector == 3, sector == 4], [val, x, zeros, zeros, x], val)
    g = np.select([sector == 0, sector == 1, sector == 2, sector == 3, sector == 4], [x, val, val, x, zeros], zeros)
    b = np.select([sector == 0, sector == 1, sector == 2, sector == 3, sector == 4], [zeros, zeros, x, val, val], x)
    return np.stack([r, g, b], axis=-1)
