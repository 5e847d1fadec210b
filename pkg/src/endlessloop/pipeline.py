"""End-to-end orchestration: detection at working scale, flow upsampling,
texture extension and loop rendering, plus stage-tagged diagnostics.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import autodirect, crf, flowfield, renderer, repeat1d
from .descriptors import DescriptorBackend, compute_descriptors
from .flowfield import DirectionStroke, SparseFlow
from .raster import (
    BinaryMask,
    RasterImage,
    VectorField,
    load_image,
    load_mask,
    resize_image,
    resize_mask,
    resize_plane,
    sample_band,
    save_image,
)


class StageError(Exception):
    """Pipeline failure tagged with the stage that produced it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.message = message


@dataclass
class ProjectConfig:
    """Everything a run needs; defaults follow the tuned working values."""

    image_path: str = ""
    mask_path: str = ""
    strokes: list | None = None  # list of point lists [[x, y], ...]
    direction_deg: float | None = None
    auto_direction: bool = False
    soft_boundary: bool = False
    frame_count: int = 80
    fps: float = 30.0
    working_long_side: int = 300
    solver_mode: str = "crf"  # "crf" | "unary-only"
    descriptor_kind: str = "patch"
    descriptor_weights: str | None = None
    patch_radius: int = 3
    band_width: int = 17
    exclusion: int = 8
    max_angle_deg: float = 30.0
    angle_steps: int = 3
    label_cap: int = 64
    unary_lambda: float = 0.1
    theta_alpha: float = 10.0
    crf_iterations: int = 10
    pairwise_weight: float = 1.0
    sparsify_sigma: float = 6.0
    grid_step: int = 8
    attenuation_spacing: int = 12
    workers: int = 1
    random_seed: int = 0  # reserved for jitter retries; the run is deterministic
    out_dir: str | None = None
    gif_path: str | None = None
    debug_dir: str | None = None

    def __post_init__(self):
        if self.frame_count < 2:
            raise ValueError("frame_count must be >= 2")
        if self.working_long_side < 64:
            raise ValueError("working_long_side must be >= 64")
        if self.solver_mode not in ("crf", "unary-only"):
            raise ValueError(f"unknown solver mode {self.solver_mode!r}")

    def config_hash(self, image_bytes: bytes | None = None, mask_bytes: bytes | None = None) -> str:
        payload = asdict(self)
        # output locations don't affect the solve
        for k in ("out_dir", "gif_path", "debug_dir", "workers", "image_path", "mask_path"):
            payload.pop(k, None)
        h = hashlib.sha256(json.dumps(payload, sort_keys=True).encode())
        for blob, path in ((image_bytes, self.image_path), (mask_bytes, self.mask_path)):
            if blob is None and path:
                with open(path, "rb") as f:
                    blob = f.read()
            h.update(blob or b"")
        return h.hexdigest()


@dataclass
class CellReport:
    component: int
    site: tuple[float, float]
    direction: tuple[float, float]
    pixels: int
    seed_median: float | None = None
    label_count: int = 0
    skipped: str | None = None


def _to_working(points: np.ndarray, full_w: int, full_h: int, ww: int, wh: int) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    out = pts.copy()
    out[:, 0] = (pts[:, 0] + 0.5) * (ww / full_w) - 0.5
    out[:, 1] = (pts[:, 1] + 0.5) * (wh / full_h) - 0.5
    return out


def _component_cells(wmask: BinaryMask, strokes: list[DirectionStroke] | None,
                     direction: tuple[float, float] | None):
    """Cells to solve: (cell mask, direction, site, component id)."""
    comps = wmask.components
    ncomp = int(comps.max()) + 1
    cells = []
    if strokes:
        sub = flowfield.split_by_strokes(wmask, strokes)
        for cell_mask, d, site in sub:
            owners = np.unique(comps[cell_mask.data])
            for comp_id in owners:
                part = cell_mask.data & (comps == comp_id)
                if part.any():
                    cells.append((BinaryMask(part), tuple(d), tuple(site), int(comp_id)))
    else:
        for comp_id in range(ncomp):
            part = comps == comp_id
            ys, xs = np.nonzero(part)
            site = (float(xs.mean()), float(ys.mean()))
            cells.append((BinaryMask(part), direction, site, comp_id))
    return cells


def _clip_line(origin, d, tmin, tmax, w, h):
    """Intersect the 1D parameter range with the image rectangle."""
    for comp, o, lim in ((0, origin[0], w - 1.0), (1, origin[1], h - 1.0)):
        dc = d[comp]
        if abs(dc) < 1e-12:
            if o < 0 or o > lim:
                return None
            continue
        t0 = (0.0 - o) / dc
        t1 = (lim - o) / dc
        lo, hi = min(t0, t1), max(t0, t1)
        tmin = max(tmin, lo)
        tmax = min(tmax, hi)
    if tmax <= tmin:
        return None
    return tmin, tmax


def _solve_cell(wimg, descriptors, cell_mask, d, site, cfg: ProjectConfig, report: CellReport,
                debug: dict | None):
    ys, xs = np.nonzero(cell_mask.data)
    dvec = np.asarray(d, dtype=np.float64)
    dvec = dvec / np.linalg.norm(dvec)
    t = (xs - site[0]) * dvec[0] + (ys - site[1]) * dvec[1]
    rng = _clip_line(site, dvec, float(t.min()), float(t.max()), wimg.width, wimg.height)
    if rng is None:
        raise repeat1d.RepetitionError("cell extent lies outside the image")
    tmin, tmax = rng
    length = tmax - tmin
    if length + 1 < 2 * cfg.exclusion + 2:
        raise repeat1d.RepetitionError(
            f"extent {length:.0f} px along direction is too short for detection"
        )
    origin = (site[0] + tmin * dvec[0], site[1] + tmin * dvec[1])
    band = min(cfg.band_width, 2 * (min(wimg.width, wimg.height) // 2) - 1)
    slice_ = sample_band(wimg, origin, tuple(dvec), length, band)
    matrix, extended, path, seeds, per_line = repeat1d.detect_repetition(slice_, cfg.exclusion)
    report.seed_median = float(np.median(np.abs(seeds.offsets)))

    labels = crf.build_labels(
        seeds, tuple(dvec), max_angle=cfg.max_angle_deg, steps=cfg.angle_steps, cap=cfg.label_cap
    )
    report.label_count = len(labels)
    guess = crf.init_guess_field(cell_mask, origin, tuple(dvec), per_line)
    unary = crf.compute_unary(
        descriptors, labels, guess, cell_mask, lam=cfg.unary_lambda, procs=max(1, cfg.workers)
    )
    weight = 0.0 if cfg.solver_mode == "unary-only" else cfg.pairwise_weight
    assignment = crf.meanfield_solve(
        unary,
        labels,
        cell_mask,
        theta_alpha=cfg.theta_alpha,
        iterations=cfg.crf_iterations,
        pairwise_weight=weight,
        filter_threads=max(1, cfg.workers),
    )
    rawf = flowfield.raw_field(assignment, labels, cell_mask)
    sparse = flowfield.sparsify(rawf, cell_mask, sigma=cfg.sparsify_sigma, grid_step=cfg.grid_step)

    if debug is not None:
        debug["selfsim"] = matrix
        debug["extended"] = extended
        debug["path"] = path
        debug["labels"] = labels
        debug["assignment"] = assignment
        debug["raw_field"] = rawf
    return sparse


def run_pipeline(config: ProjectConfig):
    """Run the full chain; returns (FrameSequence, diagnostics dict)."""
    timings: dict[str, float] = {}
    diag: dict = {"timings": timings, "warnings": [], "cells": []}
    t_total = time.perf_counter()

    t0 = time.perf_counter()
    try:
        image = load_image(config.image_path)
        mask = load_mask(config.mask_path)
    except Exception as exc:
        raise StageError("load", str(exc)) from exc
    if (mask.height, mask.width) != (image.height, image.width):
        raise StageError("load", "mask dimensions do not match the image")
    if not mask.data.any():
        raise StageError("load", "mask is empty")
    timings["load"] = time.perf_counter() - t0

    # working scale keyed to the mask bounding box long side
    t0 = time.perf_counter()
    ys, xs = np.nonzero(mask.data)
    bbox_long = max(xs.max() - xs.min() + 1, ys.max() - ys.min() + 1)
    scale = min(1.0, config.working_long_side / float(bbox_long))
    ww = max(8, int(round(image.width * scale)))
    wh = max(8, int(round(image.height * scale)))
    wimg = resize_image(image, ww, wh) if scale < 1.0 else image
    wmask = resize_mask(mask, ww, wh) if scale < 1.0 else mask
    if not wmask.data.any():
        raise StageError("scale", "mask vanished at working resolution")
    timings["scale"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    backend = DescriptorBackend(
        kind=config.descriptor_kind,
        patch_radius=config.patch_radius,
        weights_path=config.descriptor_weights,
    )
    descriptors = compute_descriptors(wimg, backend)
    timings["descriptors"] = time.perf_counter() - t0

    # resolve directions
    t0 = time.perf_counter()
    strokes_w: list[DirectionStroke] | None = None
    direction: tuple[float, float] | None = None
    if config.strokes:
        strokes_w = [
            DirectionStroke(_to_working(np.asarray(pts, float), image.width, image.height, ww, wh))
            for pts in config.strokes
        ]
    elif config.auto_direction:
        winners = autodirect.suggest_directions(wimg, descriptors)
        if not winners:
            raise StageError("direction", "no direction suggestion could be made")
        direction = (winners[0][0], winners[0][1])
        diag["suggested_directions"] = winners
    elif config.direction_deg is not None:
        a = np.deg2rad(config.direction_deg)
        direction = (float(np.cos(a)), float(np.sin(a)))
    else:
        raise StageError("direction", "provide strokes, a direction or --auto-direction")
    timings["direction"] = time.perf_counter() - t0

    # per component x per cell solves
    t0 = time.perf_counter()
    cells = _component_cells(wmask, strokes_w, direction)
    flows: list[SparseFlow] = []
    debug_data: list[dict] = []
    for cell_mask, d, site, comp_id in cells:
        report = CellReport(
            component=comp_id, site=site, direction=d, pixels=int(cell_mask.data.sum())
        )
        dbg: dict | None = {} if config.debug_dir else None
        try:
            flows.append(_solve_cell(wimg, descriptors, cell_mask, d, site, config, report, dbg))
            if dbg is not None:
                debug_data.append(dbg)
        except repeat1d.RepetitionError as exc:
            report.skipped = str(exc)
            diag["warnings"].append(f"cell (component {comp_id}) skipped: {exc}")
        diag["cells"].append(asdict(report))
    if not flows:
        raise StageError("repeat1d", "no repetition found in any cell; nothing to animate")
    timings["solve"] = time.perf_counter() - t0

    # merge, invert, densify at working scale
    t0 = time.perf_counter()
    merged = flows[0]
    for extra in flows[1:]:
        merged = merged.concat(extra)
    if config.soft_boundary:
        merged = flowfield.add_attenuation_anchors(merged, wmask, spacing=config.attenuation_spacing)
    f1w, f2w, _, _ = flowfield.merge_cells([merged], ww, wh, procs=max(1, config.workers))
    timings["flow"] = time.perf_counter() - t0

    # upsample to full resolution, vectors scaled by the resolution ratio
    t0 = time.perf_counter()
    if scale < 1.0:
        sx = image.width / ww
        sy = image.height / wh
        f1 = VectorField(
            np.stack(
                [
                    resize_plane(f1w.data[..., 0], image.width, image.height) * sx,
                    resize_plane(f1w.data[..., 1], image.width, image.height) * sy,
                ],
                axis=-1,
            )
        )
        f2 = VectorField(
            np.stack(
                [
                    resize_plane(f2w.data[..., 0], image.width, image.height) * sx,
                    resize_plane(f2w.data[..., 1], image.width, image.height) * sy,
                ],
                axis=-1,
            )
        )
    else:
        f1, f2 = f1w, f2w
    timings["upsample"] = time.perf_counter() - t0

    # support: where the fields act at render time
    if config.soft_boundary:
        from scipy import ndimage as _ndi

        radius = max(1, int(round(config.attenuation_spacing / scale)))
        support = _ndi.distance_transform_edt(~mask.data) <= radius
    else:
        support = mask.data

    t0 = time.perf_counter()
    texture = renderer.extend_texture(image, mask, f1, f2)
    timings["texture"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    spec = renderer.LoopSpec(frame_count=config.frame_count, fps=config.fps)
    seq = renderer.blend_loop(texture, f1, f2, image, spec, support, workers=config.workers)
    timings["render"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    diag["config_hash"] = config.config_hash()
    diag["field_stats"] = {
        "f1_max": float(f1.magnitude().max()),
        "f2_max": float(f2.magnitude().max()),
        "margin": texture.margin,
        "scale": scale,
    }
    if config.out_dir or config.gif_path:
        written = renderer.encode_outputs(
            seq,
            out_dir=config.out_dir,
            gif_path=config.gif_path,
            metadata={"config_hash": diag["config_hash"], "field_stats": diag["field_stats"]},
        )
        diag["outputs"] = written
    if config.debug_dir:
        _write_debug(config.debug_dir, debug_data, f1, f2)
    timings["encode"] = time.perf_counter() - t0
    timings["total"] = time.perf_counter() - t_total
    return seq, diag


def _write_debug(debug_dir: str, debug_data: list[dict], f1: VectorField, f2: VectorField) -> None:
    os.makedirs(debug_dir, exist_ok=True)
    for k, dbg in enumerate(debug_data):
        mat = dbg["extended"].values
        finite = mat[mat < dbg["extended"].sentinel]
        top = finite.max() if finite.size else 1.0
        gray = np.clip(mat / max(top, 1e-9), 0.0, 1.0)
        heat = np.stack([gray] * 3, axis=-1)
        save_image(os.path.join(debug_dir, f"cell{k}_selfsim.png"), RasterImage(heat))
        with open(os.path.join(debug_dir, f"cell{k}_path.json"), "w") as f:
            json.dump(
                {
                    "points": dbg["path"].points.tolist(),
                    "total_cost": dbg["path"].total_cost,
                },
                f,
            )
        with open(os.path.join(debug_dir, f"cell{k}_labels.json"), "w") as f:
            json.dump({"vectors": dbg["labels"].vectors.tolist()}, f)
        hsv = flowfield.flow_to_hsv_rgb(dbg["raw_field"])
        save_image(os.path.join(debug_dir, f"cell{k}_rawfield.png"), RasterImage(hsv))
    for name, fld in (("f1", f1), ("f2", f2)):
        flowfield.write_flow_binary(os.path.join(debug_dir, f"{name}.bin"), fld)
        save_image(
            os.path.join(debug_dir, f"{name}.png"),
            RasterImage(flowfield.flow_to_hsv_rgb(fld)),
        )


def suggest(image_path: str, n_corners: int = 200, working_long_side: int = 300):
    """Direction suggestions for an image, downscaled for speed."""
    image = load_image(image_path)
    long_side = max(image.width, image.height)
    scale = min(1.0, working_long_side / float(long_side))
    if scale < 1.0:
        image = resize_image(
            image, max(8, int(round(image.width * scale))), max(8, int(round(image.height * scale)))
        )
    descriptors = compute_descriptors(image, DescriptorBackend())
    return autodirect.suggest_directions(image, descriptors, n_corners=n_corners)
