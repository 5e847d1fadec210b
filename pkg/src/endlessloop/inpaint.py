"""Fast-marching inpainting: fill unknown pixels in increasing distance from
the known region, each as a normalized weighted average of already-known
neighbors within a radius, weighted by direction (alignment with the march
front normal), distance and level-set closeness.
"""

from __future__ import annotations

import numpy as np
from numba import njit

KNOWN, BAND, INSIDE = 0, 1, 2
BIG = 1.0e6


@njit(cache=True)
def _heap_push(keys, payload, size, key, item):
    i = size
    keys[i] = key
    payload[i] = item
    while i > 0:
        parent = (i - 1) // 2
        if keys[parent] <= keys[i]:
            break
        keys[parent], keys[i] = keys[i], keys[parent]
        payload[parent], payload[i] = payload[i], payload[parent]
        i = parent
    return size + 1


@njit(cache=True)
def _heap_pop(keys, payload, size):
    top_key = keys[0]
    top_item = payload[0]
    size -= 1
    keys[0] = keys[size]
    payload[0] = payload[size]
    i = 0
    while True:
        l = 2 * i + 1
        r = l + 1
        smallest = i
        if l < size and keys[l] < keys[smallest]:
            smallest = l
        if r < size and keys[r] < keys[smallest]:
            smallest = r
        if smallest == i:
            break
        keys[smallest], keys[i] = keys[i], keys[smallest]
        payload[smallest], payload[i] = payload[i], payload[smallest]
        i = smallest
    return top_key, top_item, size


@njit(cache=True)
def _eikonal(t, flags, y1, x1, y2, x2, h, w):
    if y1 < 0 or y1 >= h or x1 < 0 or x1 >= w:
        return BIG
    if y2 < 0 or y2 >= h or x2 < 0 or x2 >= w:
        return BIG
    f1 = flags[y1, x1]
    f2 = flags[y2, x2]
    if f1 == KNOWN and f2 == KNOWN:
        t1 = t[y1, x1]
        t2 = t[y2, x2]
        d = 2.0 - (t1 - t2) ** 2
        if d > 0.0:
            rt = np.sqrt(d)
            s = (t1 + t2 - rt) / 2.0
            if s >= t1 and s >= t2:
                return s
            s += rt
            if s >= t1 and s >= t2:
                return s
        return BIG
    if f1 == KNOWN:
        return 1.0 + t[y1, x1]
    if f2 == KNOWN:
        return 1.0 + t[y2, x2]
    return BIG


@njit(cache=True)
def _march(img, known, radius):
    h, w, c = img.shape
    t = np.full((h, w), BIG, dtype=np.float64)
    flags = np.full((h, w), INSIDE, dtype=np.uint8)
    out = img.copy()
    for y in range(h):
        for x in range(w):
            if known[y, x]:
                flags[y, x] = KNOWN
                t[y, x] = 0.0

    cap = 8 * h * w + 16
    keys = np.empty(cap, dtype=np.float64)
    payload = np.empty(cap, dtype=np.int64)
    size = 0
    for y in range(h):
        for x in range(w):
            if flags[y, x] != KNOWN:
                continue
            for k in range(4):
                ny = y + (1 if k == 0 else -1 if k == 1 else 0)
                nx = x + (1 if k == 2 else -1 if k == 3 else 0)
                if 0 <= ny < h and 0 <= nx < w and flags[ny, nx] == INSIDE:
                    flags[ny, nx] = BAND
                    t[ny, nx] = 1.0
                    size = _heap_push(keys, payload, size, 1.0, ny * w + nx)

    while size > 0:
        tk, item, size = _heap_pop(keys, payload, size)
        y = item // w
        x = item % w
        if flags[y, x] == KNOWN:
            continue
        flags[y, x] = KNOWN
        t[y, x] = tk

        # gradient of the arrival time at (y, x)
        gtx = 0.0
        gty = 0.0
        if 0 < x < w - 1 and flags[y, x - 1] == KNOWN and flags[y, x + 1] == KNOWN:
            gtx = (t[y, x + 1] - t[y, x - 1]) * 0.5
        elif x < w - 1 and flags[y, x + 1] == KNOWN:
            gtx = t[y, x + 1] - tk
        elif x > 0 and flags[y, x - 1] == KNOWN:
            gtx = tk - t[y, x - 1]
        if 0 < y < h - 1 and flags[y - 1, x] == KNOWN and flags[y + 1, x] == KNOWN:
            gty = (t[y + 1, x] - t[y - 1, x]) * 0.5
        elif y < h - 1 and flags[y + 1, x] == KNOWN:
            gty = t[y + 1, x] - tk
        elif y > 0 and flags[y - 1, x] == KNOWN:
            gty = tk - t[y - 1, x]

        acc = np.zeros(c, dtype=np.float64)
        wsum = 0.0
        r = radius
        for dy in range(-r, r + 1):
            ny = y + dy
            if ny < 0 or ny >= h:
                continue
            for dx in range(-r, r + 1):
                nx = x + dx
                if nx < 0 or nx >= w:
                    continue
                if flags[ny, nx] != KNOWN or (dy == 0 and dx == 0):
                    continue
                d2 = float(dx * dx + dy * dy)
                if d2 > r * r:
                    continue
                d = np.sqrt(d2)
                direction = abs(dx * gtx + dy * gty) / d
                if direction < 1e-6:
                    direction = 1e-6
                dst = 1.0 / (d2 * d)
                lev = 1.0 / (1.0 + abs(t[ny, nx] - tk))
                wgt = direction * dst * lev
                wsum += wgt
                for ch in range(c):
                    acc[ch] += wgt * out[ny, nx, ch]
        if wsum > 0:
            for ch in range(c):
                out[y, x, ch] = acc[ch] / wsum

        for k in range(4):
            ny = y + (1 if k == 0 else -1 if k == 1 else 0)
            nx = x + (1 if k == 2 else -1 if k == 3 else 0)
            if ny < 0 or ny >= h or nx < 0 or nx >= w:
                continue
            if flags[ny, nx] == KNOWN:
                continue
            tn = min(
                min(_eikonal(t, flags, ny, nx - 1, ny - 1, nx, h, w),
                    _eikonal(t, flags, ny, nx + 1, ny - 1, nx, h, w)),
                min(_eikonal(t, flags, ny, nx - 1, ny + 1, nx, h, w),
                    _eikonal(t, flags, ny, nx + 1, ny + 1, nx, h, w)),
            )
            if tn < t[ny, nx]:
                t[ny, nx] = tn
                flags[ny, nx] = BAND
                size = _heap_push(keys, payload, size, tn, ny * w + nx)
    return out


def inpaint(image: np.ndarray, known_mask: np.ndarray, radius: int = 5) -> np.ndarray:
    """Fill everything outside known_mask from the known content.

    image is (h, w, c) float; known_mask is (h, w) bool. Returns a new array
    where unknown pixels are inpainted; known pixels are untouched.
    """
    img = np.ascontiguousarray(image, dtype=np.float64)
    known = np.ascontiguousarray(known_mask, dtype=np.bool_)
    if not known.any():
        raise ValueError("inpainting needs at least one known pixel")
    if known.all():
        return img.copy()
    return _march(img, known, int(radius))
