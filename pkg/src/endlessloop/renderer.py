"""Loop rendering: texture extension, time-parameterized warps, crossfade.

The animation V(u) for u in [-1, 1] warps one precomputed extended texture;
frames of the final loop blend V(s) with V(s-1) under a linear ramp so the
wrap point lands exactly where each branch's own discontinuity carries zero
weight. Texture extension happens once: pad, inpaint everything outside the
mask, pull periodic content into a band around the mask with both flow
fields, and reconcile it with the inpainted canvas in the gradient domain.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .gifenc import write_gif
from .inpaint import inpaint
from .poisson import poisson_blend
from .raster import BinaryMask, RasterImage, VectorField, bilinear_lookup, save_image


@dataclass(frozen=True)
class ExtendedTexture:
    """Padded canvas whose band around the mask continues the pattern.

    provenance: 0 = original image, 1 = inpainted, 2 = warp-blended band.
    """

    canvas: np.ndarray  # (h + 2m, w + 2m, 3)
    margin: int
    provenance: np.ndarray  # (h + 2m, w + 2m) uint8


@dataclass(frozen=True)
class LoopSpec:
    """Frame count, playback rate and the crossfade schedule.

    The loop parameter s runs over [0, 1); alpha(s) = s and the shifted
    branch plays at s - 1, so alpha is zero exactly at the shifted branch's
    wrap discontinuity.
    """

    frame_count: int = 80
    fps: float = 30.0

    def __post_init__(self):
        if self.frame_count < 2:
            raise ValueError("a loop needs at least 2 frames")

    def alpha(self, s: float) -> float:
        return s

    def shift(self, s: float) -> float:
        return s - 1.0

    def timestamps(self) -> np.ndarray:
        return np.arange(self.frame_count, dtype=np.float64) / self.frame_count


@dataclass(frozen=True)
class FrameSequence:
    frames: list[np.ndarray]
    timestamps: np.ndarray
    fps: float

    def __len__(self) -> int:
        return len(self.frames)


def _dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    from scipy import ndimage

    if radius <= 0:
        return mask.copy()
    dist = ndimage.distance_transform_edt(~mask)
    return dist <= radius


def extend_texture(
    image: RasterImage,
    mask: BinaryMask,
    f1: VectorField,
    f2: VectorField,
    margin: int | None = None,
    inpaint_radius: int = 5,
) -> ExtendedTexture:
    """Build the warp source canvas.

    1. Pad by margin (default max displacement + 8), replicating edges.
    2. Inpaint every non-mask canvas pixel from mask content.
    3. Pull masked content outward with both fields where the pulled sample
       lands inside the mask.
    4. Poisson-blend that band onto the inpainted canvas (boundary pinned to
       the canvas) so seams vanish.
    """
    h, w = image.height, image.width
    if margin is None:
        maxdisp = max(f1.magnitude().max(), f2.magnitude().max())
        margin = int(np.ceil(maxdisp)) + 8
    m = margin
    canvas = np.pad(image.data, ((m, m), (m, m), (0, 0)), mode="edge")
    known = np.zeros(canvas.shape[:2], dtype=bool)
    known[m : m + h, m : m + w] = mask.data
    provenance = np.where(known, 0, 1).astype(np.uint8)

    if known.all():
        return ExtendedTexture(canvas=canvas, margin=m, provenance=provenance)

    canvas = inpaint(canvas, known, radius=inpaint_radius)

    # pull periodic content outward ring by ring: each pass may sample from
    # the mask or from content pulled in earlier passes, so coverage grows to
    # the full margin instead of a single displacement length and the blend
    # boundary never sits where the warp will sample
    ch, cw = canvas.shape[:2]
    padf1 = np.pad(f1.data, ((m, m), (m, m), (0, 0)), mode="edge")
    padf2 = np.pad(f2.data, ((m, m), (m, m), (0, 0)), mode="edge")
    band = _dilate(known, m) & ~known
    content = canvas.copy()
    filled = known.copy()
    covered = np.zeros_like(known)
    for _ in range(8):
        ys, xs = np.nonzero(band & ~filled)
        if ys.size == 0:
            break
        vals_sum = np.zeros((ys.size, 3))
        weight = np.zeros(ys.size)
        for fld in (padf1, padf2):
            sx = xs + fld[ys, xs, 0]
            sy = ys + fld[ys, xs, 1]
            ix = np.clip(np.rint(sx).astype(np.intp), 0, cw - 1)
            iy = np.clip(np.rint(sy).astype(np.intp), 0, ch - 1)
            valid = filled[iy, ix]
            vals = bilinear_lookup(content, sx[valid], sy[valid])
            vals_sum[valid] += vals
            weight[valid] += 1.0
        hit = weight > 0
        if not hit.any():
            break
        content[ys[hit], xs[hit]] = vals_sum[hit] / weight[hit][:, None]
        filled[ys[hit], xs[hit]] = True
        covered[ys[hit], xs[hit]] = True

    if covered.any():
        from scipy import ndimage

        # replicate pulled content outward: guide gradients across the region
        # boundary, and feather the un-reached canvas toward the pulled values
        # so the blend boundary is nearly consistent where it touches the band
        dist, (iy, ix) = ndimage.distance_transform_edt(~filled, return_indices=True)
        replicated = np.where(filled[..., None], content, content[iy, ix])
        feather = np.exp(-dist / 4.0)[..., None]
        dest = np.where(
            filled[..., None], content, feather * replicated + (1 - feather) * canvas
        )
        canvas = poisson_blend(dest, replicated, covered)
        canvas = np.clip(canvas, 0.0, 1.0)
        provenance[covered] = 2

    return ExtendedTexture(canvas=canvas, margin=m, provenance=provenance)


def warp(
    texture: ExtendedTexture,
    field: VectorField,
    t: float,
    original: RasterImage,
    support: np.ndarray | None = None,
) -> RasterImage:
    """Backward warp: out(p) = texture(p + t * field(p)), margin-offset.

    Pixels outside the support (where the field is not applied) copy the
    original image verbatim.
    """
    if abs(t) > 1.0 + 1e-9:
        raise ValueError("|t| must be <= 1")
    h, w = original.height, original.width
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    fd = field.data
    sx = xs + t * fd[..., 0] + texture.margin
    sy = ys + t * fd[..., 1] + texture.margin
    out = bilinear_lookup(texture.canvas, sx, sy)
    if support is not None:
        out = np.where(support[..., None], out, original.data)
    else:
        still = (fd[..., 0] == 0) & (fd[..., 1] == 0)
        out = np.where(still[..., None], original.data, out)
    return RasterImage(np.clip(out, 0.0, 1.0))


_WORKER_CTX: dict = {}


def _worker_init(texture, f1, f2, original, support, spec, shm_name, shape) -> None:
    from multiprocessing import shared_memory

    shm = shared_memory.SharedMemory(name=shm_name)
    _WORKER_CTX["args"] = (texture, f1, f2, original, support, spec)
    _WORKER_CTX["shm"] = shm  # keep alive for the worker's lifetime
    _WORKER_CTX["frames"] = np.ndarray(shape, dtype=np.float64, buffer=shm.buf)


def _render_one(k: int) -> int:
    texture, f1, f2, original, support, spec = _WORKER_CTX["args"]
    s = k / spec.frame_count
    _WORKER_CTX["frames"][k] = _frame_at(texture, f1, f2, original, support, spec, s)
    return k


def _frame_at(texture, f1, f2, original, support, spec, s: float) -> np.ndarray:
    a = spec.alpha(s)
    u, v = s, spec.shift(s)
    # positive time samples through the inverse field, negative through the
    # forward one: this realizes V(u)(p) = I(p - u * motion(p)) for all u,
    # which keeps the on-screen drift aligned with the requested direction.
    fa = warp(texture, f2 if u >= 0 else f1, abs(u), original, support)
    fb = warp(texture, f2 if v >= 0 else f1, abs(v), original, support)
    out = np.clip(a * fa.data + (1.0 - a) * fb.data, 0.0, 1.0)
    if support is None:
        still = (f1.data == 0).all(axis=2) & (f2.data == 0).all(axis=2)
    else:
        still = ~support
    # convex blending of identical values is not bit-exact in floats, so
    # unmoving pixels are copied from the input outright
    out[still] = original.data[still]
    return out


def blend_loop(
    texture: ExtendedTexture,
    f1: VectorField,
    f2: VectorField,
    original: RasterImage,
    spec: LoopSpec,
    support: np.ndarray | None = None,
    workers: int = 1,
) -> FrameSequence:
    """Render the crossfaded loop; frames are independent so they can be
    rendered by a process pool without changing the result."""
    ts = spec.timestamps()
    frames: list[np.ndarray | None] = [None] * spec.frame_count
    if workers <= 1:
        for k in range(spec.frame_count):
            frames[k] = _frame_at(texture, f1, f2, original, support, spec, ts[k])
    else:
        from multiprocessing import shared_memory

        h, w = original.height, original.width
        shape = (spec.frame_count, h, w, 3)
        shm = shared_memory.SharedMemory(create=True, size=int(np.prod(shape)) * 8)
        try:
            with ProcessPoolExecutor(
                max_workers=workers,
                initializer=_worker_init,
                initargs=(texture, f1, f2, original, support, spec, shm.name, shape),
            ) as pool:
                list(pool.map(_render_one, range(spec.frame_count), chunksize=4))
            buf = np.ndarray(shape, dtype=np.float64, buffer=shm.buf)
            for k in range(spec.frame_count):
                frames[k] = buf[k].copy()
        finally:
            shm.close()
            shm.unlink()
    return FrameSequence(frames=frames, timestamps=ts, fps=spec.fps)


def wrap_frame(
    texture: ExtendedTexture,
    f1: VectorField,
    f2: VectorField,
    original: RasterImage,
    spec: LoopSpec,
    support: np.ndarray | None = None,
) -> np.ndarray:
    """The frame at s = 1, i.e. frame 0 of the next cycle."""
    return _frame_at(texture, f1, f2, original, support, spec, 1.0)


def encode_outputs(
    seq: FrameSequence,
    out_dir: str | None = None,
    gif_path: str | None = None,
    metadata: dict | None = None,
) -> dict:
    """Write frame_%04d.png files and/or an animated GIF plus loop.json."""
    written: dict = {"frames": [], "gif": None}
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        for k, frame in enumerate(seq.frames):
            path = os.path.join(out_dir, f"frame_{k:04d}.png")
            save_image(path, RasterImage(frame))
            written["frames"].append(path)
        meta = {
            "frame_count": len(seq),
            "fps": seq.fps,
        }
        if metadata:
            meta.update(metadata)
        meta_path = os.path.join(out_dir, "loop.json")
        with open(meta_path, "w") as f:
            json.dump(meta, f, indent=2, sort_keys=True)
        written["loop_json"] = meta_path
    if gif_path:
        write_gif(gif_path, seq.frames, fps=seq.fps)
        written["gif"] = gif_path
    return written
