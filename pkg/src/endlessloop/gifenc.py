"""Animated GIF writer: GIF89a container, global median-cut palette, LZW.

Good enough for desk-scale loops; frames share one 256-color palette built
by median cut over pixels pooled from every frame, the loop extension is
always set to repeat forever, and the per-frame delay is expressed in
centiseconds as the format requires.
"""

from __future__ import annotations

import struct

import numpy as np
from scipy.spatial import cKDTree


def median_cut_palette(pixels: np.ndarray, n_colors: int = 256) -> np.ndarray:
    """Median-cut quantization of (N, 3) uint8 pixels into <= n_colors."""
    colors, counts = np.unique(pixels.reshape(-1, 3), axis=0, return_counts=True)
    boxes = [(colors, counts)]
    while len(boxes) < n_colors:
        # split the most populous box that still has more than one color
        sizes = [c.sum() if col.shape[0] > 1 else -1 for col, c in boxes]
        k = int(np.argmax(sizes))
        if sizes[k] < 0:
            break
        col, cnt = boxes[k]
        spans = col.max(axis=0).astype(int) - col.min(axis=0).astype(int)
        axis = int(np.argmax(spans))
        order = np.argsort(col[:, axis], kind="stable")
        col, cnt = col[order], cnt[order]
        half = cnt.sum() / 2.0
        csum = np.cumsum(cnt)
        split = int(np.searchsorted(csum, half)) + 1
        split = min(max(split, 1), col.shape[0] - 1)
        boxes[k] = (col[:split], cnt[:split])
        boxes.append((col[split:], cnt[split:]))
    palette = np.array(
        [
            np.round((col.astype(np.float64) * cnt[:, None]).sum(axis=0) / cnt.sum())
            for col, cnt in boxes
        ],
        dtype=np.uint8,
    )
    return palette


def _lzw_encode(indices: np.ndarray, min_code_size: int) -> bytes:
    clear = 1 << min_code_size
    end = clear + 1
    out = bytearray()
    cur = 0
    cur_bits = 0

    def emit(code: int, size: int):
        nonlocal cur, cur_bits
        cur |= code << cur_bits
        cur_bits += size
        while cur_bits >= 8:
            out.append(cur & 0xFF)
            cur >>= 8
            cur_bits -= 8

    table: dict[tuple[int, int], int] = {}
    next_code = end + 1
    code_size = min_code_size + 1
    emit(clear, code_size)
    prefix = int(indices[0])
    for sym in indices[1:]:
        sym = int(sym)
        key = (prefix, sym)
        found = table.get(key)
        if found is not None:
            prefix = found
            continue
        emit(prefix, code_size)
        table[key] = next_code
        next_code += 1
        if next_code - 1 == (1 << code_size) and code_size < 12:
            code_size += 1
        if next_code >= 4096:
            emit(clear, code_size)
            table.clear()
            next_code = end + 1
            code_size = min_code_size + 1
        prefix = sym
    emit(prefix, code_size)
    emit(end, code_size)
    if cur_bits:
        out.append(cur & 0xFF)
    return bytes(out)


def write_gif(
    path,
    frames: list[np.ndarray],
    fps: float = 30.0,
    n_colors: int = 256,
    sample_stride: int = 7,
) -> None:
    """Write float [0,1] RGB frames as an infinitely looping animated GIF."""
    if not frames:
        raise ValueError("no frames to encode")
    h, w = frames[0].shape[:2]
    as_u8 = [np.clip(np.round(f * 255.0), 0, 255).astype(np.uint8) for f in frames]
    pool = np.concatenate([f.reshape(-1, 3)[::sample_stride] for f in as_u8], axis=0)
    palette = median_cut_palette(pool, n_colors)
    tree = cKDTree(palette.astype(np.float64))

    delay_cs = max(1, int(round(100.0 / fps)))
    pal_bits = max(1, int(np.ceil(np.log2(max(2, palette.shape[0])))))
    gct_size = 1 << pal_bits
    pal_full = np.zeros((gct_size, 3), dtype=np.uint8)
    pal_full[: palette.shape[0]] = palette

    parts: list[bytes] = [b"GIF89a"]
    packed = 0x80 | ((8 - 1) << 4) | (pal_bits - 1)  # GCT present, 8-bit color res
    parts.append(struct.pack("<HHBBB", w, h, packed, 0, 0))
    parts.append(pal_full.tobytes())
    # NETSCAPE looping extension, loop count 0 = forever
    parts.append(b"\x21\xff\x0bNETSCAPE2.0\x03\x01\x00\x00\x00")

    min_code_size = max(2, pal_bits)
    for frame in as_u8:
        _, idx = tree.query(frame.reshape(-1, 3).astype(np.float64))
        indices = idx.astype(np.int32)
        parts.append(b"\x21\xf9\x04")
        parts.append(struct.pack("<BHBB", 0x04, delay_cs, 0, 0))  # disposal 1, no transparency
        parts.append(b"\x2c" + struct.pack("<HHHHB", 0, 0, w, h, 0))
        parts.append(bytes([min_code_size]))
        data = _lzw_encode(indices, min_code_size)
        for off in range(0, len(data), 255):
            chunk = data[off : off + 255]
            parts.append(bytes([len(chunk)]) + chunk)
        parts.append(b"\x00")
    parts.append(b"\x3b")
    with open(path, "wb") as f:
        f.write(b"".join(parts))
