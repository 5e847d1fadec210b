"""Per-pixel feature vectors for match scoring and direction voting.

Two interchangeable backends:

* ``patch`` (default): the 7x7 RGB neighborhood plus per-channel Sobel
  gradients at the center, L2-normalized. 153 dims at radius 3. No external
  data needed.
* ``conv-weights``: two stacked 3x3 convolution layers with ReLU whose
  activations are concatenated per pixel; weights are read from a small
  binary file so any pretrained first-two-layer filters can be dropped in.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .raster import RasterImage

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_Y = SOBEL_X.T

ELCW_MAGIC = b"ELCW"
ELCW_VERSION = 1


class DescriptorConfigError(Exception):
    """Raised for unusable backend configuration (bad weights file etc.)."""


@dataclass(frozen=True)
class DescriptorBackend:
    """Backend selector; exactly one is active per run."""

    kind: str = "patch"
    patch_radius: int = 3
    weights_path: str | None = None

    def __post_init__(self):
        if self.kind not in ("patch", "conv-weights"):
            raise DescriptorConfigError(f"unknown descriptor backend {self.kind!r}")
        if self.kind == "patch" and self.patch_radius < 1:
            raise DescriptorConfigError("patch radius must be >= 1")
        if self.kind == "conv-weights" and not self.weights_path:
            raise DescriptorConfigError("conv-weights backend needs a weights file")


@dataclass(frozen=True)
class DescriptorField:
    """Dense (h, w, dim) feature array; all entries finite."""

    data: np.ndarray

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[2]


def compute_descriptors(image: RasterImage, backend: DescriptorBackend | None = None) -> DescriptorField:
    if backend is None:
        backend = DescriptorBackend()
    if backend.kind == "patch":
        return DescriptorField(_patch_features(image.data, backend.patch_radius))
    weights = load_conv_weights(backend.weights_path)
    return DescriptorField(_conv_features(image.data, weights))


def descriptor_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Squared L2 distance between two descriptor vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("descriptor dimensions differ")
    d = a - b
    return float(np.dot(d, d))


# ---------------------------------------------------------------------------
# patch backend


def _patch_features(img: np.ndarray, radius: int) -> np.ndarray:
    h, w, _ = img.shape
    pad = np.pad(img, ((radius, radius), (radius, radius), (0, 0)), mode="reflect")
    win = sliding_window_view(pad, (2 * radius + 1, 2 * radius + 1), axis=(0, 1))
    patches = win.reshape(h, w, -1)
    grads = []
    for c in range(3):
        grads.append(ndimage.correlate(img[:, :, c], SOBEL_X, mode="reflect")[..., None])
        grads.append(ndimage.correlate(img[:, :, c], SOBEL_Y, mode="reflect")[..., None])
    feat = np.concatenate([patches] + grads, axis=2).astype(np.float64)
    norms = np.linalg.norm(feat, axis=2, keepdims=True)
    np.divide(feat, norms, out=feat, where=norms > 0)
    return feat


# ---------------------------------------------------------------------------
# conv backend


@dataclass(frozen=True)
class ConvLayer:
    weights: np.ndarray  # (out_ch, in_ch, kh, kw)
    biases: np.ndarray  # (out_ch,)


def load_conv_weights(path) -> list[ConvLayer]:
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as exc:
        raise DescriptorConfigError(f"cannot read weights file: {exc}") from exc
    try:
        if blob[:4] != ELCW_MAGIC:
            raise DescriptorConfigError("bad magic, not a conv weights file")
        version, layer_count = struct.unpack_from("<II", blob, 4)
        if version != ELCW_VERSION:
            raise DescriptorConfigError(f"unsupported weights version {version}")
        off = 12
        layers = []
        for _ in range(layer_count):
            out_ch, in_ch, kh, kw = struct.unpack_from("<IIII", blob, off)
            off += 16
            wn = out_ch * in_ch * kh * kw
            weights = np.frombuffer(blob, dtype="<f4", count=wn, offset=off).astype(np.float64)
            off += 4 * wn
            biases = np.frombuffer(blob, dtype="<f4", count=out_ch, offset=off).astype(np.float64)
            off += 4 * out_ch
            layers.append(ConvLayer(weights.reshape(out_ch, in_ch, kh, kw), biases))
    except (struct.error, ValueError) as exc:
        raise DescriptorConfigError(f"corrupt weights file: {exc}") from exc
    if not layers:
        raise DescriptorConfigError("weights file holds no layers")
    return layers


def save_conv_weights(path, layers: list[ConvLayer]) -> None:
    parts = [ELCW_MAGIC, struct.pack("<II", ELCW_VERSION, len(layers))]
    for layer in layers:
        out_ch, in_ch, kh, kw = layer.weights.shape
        parts.append(struct.pack("<IIII", out_ch, in_ch, kh, kw))
        parts.append(layer.weights.astype("<f4").tobytes())
        parts.append(layer.biases.astype("<f4").tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(parts))


def _conv2d(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """Correlate (h, w, cin) with (cout, cin, kh, kw), reflective boundary."""
    kh, kw = layer.weights.shape[2:]
    ph, pw = kh // 2, kw // 2
    pad = np.pad(x, ((ph, ph), (pw, pw), (0, 0)), mode="reflect")
    win = sliding_window_view(pad, (kh, kw), axis=(0, 1))  # (h, w, cin, kh, kw)
    out = np.einsum("hwikl,oikl->hwo", win, layer.weights, optimize=True)
    return out + layer.biases[None, None, :]


def _conv_features(img: np.ndarray, layers: list[ConvLayer]) -> np.ndarray:
    acts = []
    x = img.astype(np.float64)
    for layer in layers:
        x = np.maximum(_conv2d(x, layer), 0.0)
        acts.append(x)
    return np.concatenate(acts, axis=2)
