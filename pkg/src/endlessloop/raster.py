"""Image, mask and vector-field containers plus the sampling/filtering primitives.

Coordinate convention (fixed project-wide): x grows right, y grows down,
pixel centers sit at integer coordinates. Angles are measured from +x,
counterclockwise in this frame. Out-of-bounds samples clamp to the edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage


@dataclass(frozen=True)
class RasterImage:
    """RGB image, float values in [0,1], shape (h, w, 3) row-major."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[2] != 3:
            raise ValueError("image data must have shape (h, w, 3)")
        if self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise ValueError("image must be at least 1x1")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class BinaryMask:
    """Boolean mask with 8-connected component labels computed on demand."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 2:
            raise ValueError("mask data must have shape (h, w)")
        if self.data.dtype != np.bool_:
            object.__setattr__(self, "data", self.data.astype(bool))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def components(self) -> np.ndarray:
        """Label map, -1 outside the mask, ids 0..k-1 in raster discovery order."""
        if not hasattr(self, "_components"):
            object.__setattr__(self, "_components", connected_components(self))
        return self._components

    @property
    def component_count(self) -> int:
        comps = self.components
        return int(comps.max()) + 1 if comps.size else 0


@dataclass(frozen=True)
class VectorField:
    """Per-pixel 2D displacement, shape (h, w, 2) with (dx, dy) in pixels."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[2] != 2:
            raise ValueError("field data must have shape (h, w, 2)")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("field components must be finite")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.data[..., 0], self.data[..., 1])


@dataclass(frozen=True)
class BandSlice:
    """Sequence of column vectors sampled along a line.

    columns has shape (n, band_width * channels); column i is the band of
    bilinear samples perpendicular to the line at parameter i * step,
    channels interleaved per sample point.
    """

    columns: np.ndarray
    origin: tuple[float, float]
    direction: tuple[float, float]
    band_width: int
    step: float = 1.0

    @property
    def n(self) -> int:
        return self.columns.shape[0]

    @property
    def column_length(self) -> int:
        return self.columns.shape[1]

    def position(self, i: float) -> tuple[float, float]:
        """Image coordinates of column i's center."""
        return (
            self.origin[0] + i * self.step * self.direction[0],
            self.origin[1] + i * self.step * self.direction[1],
        )


# ---------------------------------------------------------------------------
# sampling


def bilinear_lookup(data: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized bilinear interpolation with edge clamping.

    data is (h, w) or (h, w, c); xs/ys are same-shape coordinate arrays.
    Integer coordinates reproduce the underlying values exactly.
    """
    h, w = data.shape[:2]
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    if data.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = data[y0, x0] * (1 - fx) + data[y0, x1] * fx
    bot = data[y1, x0] * (1 - fx) + data[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def bilinear_sample(image: RasterImage, point: tuple[float, float]) -> np.ndarray:
    """Sample one RGB value at a real-valued (x, y) point."""
    x = np.asarray([point[0]], dtype=np.float64)
    y = np.asarray([point[1]], dtype=np.float64)
    return bilinear_lookup(image.data, x, y)[0]


def sample_band(
    image: RasterImage,
    origin: tuple[float, float],
    direction: tuple[float, float],
    length: float,
    band_width: int = 17,
) -> BandSlice:
    """Sample a band of pixels along the line origin + t*direction.

    Columns are taken at unit spacing for t = 0..floor(length); each column
    holds band_width bilinear samples across the line (perpendicular offsets
    -(bw-1)/2 .. +(bw-1)/2), channels interleaved.
    """
    if length < 1:
        raise ValueError("band length must be >= 1 px")
    if band_width < 1 or band_width % 2 == 0:
        raise ValueError("band_width must be odd and >= 1")
    dnorm = float(np.hypot(direction[0], direction[1]))
    if dnorm < 1e-6:
        raise ValueError("degenerate direction")
    dx, dy = direction[0] / dnorm, direction[1] / dnorm
    px, py = -dy, dx  # perpendicular, +90 deg
    n = int(np.floor(length + 1e-9)) + 1
    ts = np.arange(n, dtype=np.float64)
    offs = np.arange(band_width, dtype=np.float64) - (band_width - 1) / 2.0
    xs = origin[0] + ts[:, None] * dx + offs[None, :] * px
    ys = origin[1] + ts[:, None] * dy + offs[None, :] * py
    samples = bilinear_lookup(image.data, xs, ys)  # (n, bw, 3)
    return BandSlice(
        columns=samples.reshape(n, band_width * 3),
        origin=(float(origin[0]), float(origin[1])),
        direction=(dx, dy),
        band_width=band_width,
    )


# ---------------------------------------------------------------------------
# filtering


def _gauss_kernel(sigma: float) -> np.ndarray:
    radius = max(1, int(round(3.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(
    data: np.ndarray, sigma: float, support_mask: np.ndarray | None = None
) -> np.ndarray:
    """Separable Gaussian blur, kernel truncated at +-3 sigma.

    With support_mask, performs normalized masked convolution: only active
    pixels contribute and weights are renormalized, so values outside the
    mask never leak in. Masked output is zero outside the support.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    k = _gauss_kernel(sigma)
    arr = np.asarray(data, dtype=np.float64)

    def _blur(a: np.ndarray, mode: str) -> np.ndarray:
        out = ndimage.correlate1d(a, k, axis=0, mode=mode)
        return ndimage.correlate1d(out, k, axis=1, mode=mode)

    if support_mask is None:
        if arr.ndim == 2:
            return _blur(arr, "reflect")
        return np.stack([_blur(arr[..., c], "reflect") for c in range(arr.shape[2])], axis=-1)

    m = np.asarray(support_mask, dtype=np.float64)
    den = _blur(m, "constant")
    channels = arr[..., None] if arr.ndim == 2 else arr
    out = np.zeros_like(channels)
    active = m > 0
    safe = den > 1e-12
    for c in range(channels.shape[2]):
        num = _blur(channels[..., c] * m, "constant")
        res = np.zeros_like(num)
        res[safe] = num[safe] / den[safe]
        out[..., c] = np.where(active, res, 0.0)
    return out[..., 0] if arr.ndim == 2 else out


# ---------------------------------------------------------------------------
# connectivity


def connected_components(mask: BinaryMask | np.ndarray) -> np.ndarray:
    """8-connected labeling; ids follow raster-scan discovery order, -1 inactive."""
    m = mask.data if isinstance(mask, BinaryMask) else np.asarray(mask, dtype=bool)
    structure = np.ones((3, 3), dtype=bool)
    raw, count = ndimage.label(m, structure=structure)
    labels = np.full(m.shape, -1, dtype=np.int32)
    if count == 0:
        return labels
    # remap ids so they follow first appearance in raster order
    flat = raw.ravel()
    active = flat > 0
    first_idx = np.full(count + 1, flat.size, dtype=np.int64)
    idx = np.nonzero(active)[0]
    np.minimum.at(first_idx, flat[idx], idx)
    order = np.argsort(first_idx[1:], kind="stable")
    remap = np.empty(count + 1, dtype=np.int32)
    remap[0] = -1
    remap[1 + order] = np.arange(count, dtype=np.int32)
    labels = remap[raw]
    return labels


# ---------------------------------------------------------------------------
# resizing


def resize_plane(plane: np.ndarray, new_w: int, new_h: int) -> np.ndarray:
    """Bilinear resize of a (h, w) or (h, w, c) array, centers aligned."""
    h, w = plane.shape[:2]
    xs = (np.arange(new_w, dtype=np.float64) + 0.5) * (w / new_w) - 0.5
    ys = (np.arange(new_h, dtype=np.float64) + 0.5) * (h / new_h) - 0.5
    gx, gy = np.meshgrid(xs, ys)
    return bilinear_lookup(plane, gx, gy)


def resize_image(image: RasterImage, new_w: int, new_h: int) -> RasterImage:
    """Resize with a mild pre-blur when downsampling to limit aliasing."""
    data = image.data
    ratio = max(image.width / new_w, image.height / new_h)
    if ratio > 1.2:
        data = gaussian_blur(data, sigma=0.5 * (ratio - 1.0) + 0.01)
    out = np.clip(resize_plane(data, new_w, new_h), 0.0, 1.0)
    return RasterImage(out)


def resize_mask(mask: BinaryMask, new_w: int, new_h: int) -> BinaryMask:
    cover = resize_plane(mask.data.astype(np.float64), new_w, new_h)
    return BinaryMask(cover >= 0.5)


# ---------------------------------------------------------------------------
# I/O: 8-bit PNG in, 8-bit PNG out; alpha ignored on input


def load_image(path) -> RasterImage:
    with Image.open(path) as im:
        rgb = im.convert("RGB")
        data = np.asarray(rgb, dtype=np.float64) / 255.0
    return RasterImage(data)


def save_image(path, image: RasterImage) -> None:
    arr = np.clip(np.round(image.data * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def load_mask(path) -> BinaryMask:
    with Image.open(path) as im:
        gray = im.convert("L")
        data = np.asarray(gray, dtype=np.uint8)
    return BinaryMask(data >= 128)


def save_mask(path, mask: BinaryMask) -> None:
    arr = np.where(mask.data, 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")
