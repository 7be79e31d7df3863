"""Fast-marching inpainting kernel (numba).

Hole pixels are visited in order of their arrival time ``T`` from the hole
boundary, found by solving the Eikonal equation ``|grad T| = 1`` on the pixel
grid. Each newly reached pixel ``p`` becomes the weighted mean of first-order
estimates ``I(q) + grad I(q) . (p - q)`` over already-known ``q`` with
``|p - q| <= radius``. Weights multiply three factors:

* direction: ``|(p - q) . N| / |p - q|`` with ``N`` the unit normal of the front,
* distance: ``1 / |p - q|^2``,
* level set: ``1 / (1 + |T(p) - T(q)|)``.
"""

import heapq

import numpy as np
from numba import njit

KNOWN = 0
BAND = 1
INSIDE = 2
FAR = 1.0e6


@njit(cache=True)
def _available(flag, i, j):
    h, w = flag.shape
    return 0 <= i < h and 0 <= j < w and flag[i, j] != INSIDE


@njit(cache=True)
def _solve(i1, j1, i2, j2, flag, T):
    a1 = _available(flag, i1, j1)
    a2 = _available(flag, i2, j2)
    if a1 and a2:
        t1 = T[i1, j1]
        t2 = T[i2, j2]
        d = 2.0 - (t1 - t2) * (t1 - t2)
        if d < 0.0:
            return 1.0 + min(t1, t2)
        r = np.sqrt(d)
        s = (t1 + t2 - r) * 0.5
        if s >= t1 and s >= t2:
            return s
        s += r
        if s >= t1 and s >= t2:
            return s
        return 1.0 + min(t1, t2)
    if a1:
        return 1.0 + T[i1, j1]
    if a2:
        return 1.0 + T[i2, j2]
    return FAR


@njit(cache=True)
def _arrival(i, j, flag, T):
    return min(
        min(_solve(i - 1, j, i, j - 1, flag, T), _solve(i + 1, j, i, j - 1, flag, T)),
        min(_solve(i - 1, j, i, j + 1, flag, T), _solve(i + 1, j, i, j + 1, flag, T)),
    )


@njit(cache=True)
def _axis_diff(values, flag, i, j, di, dj, own):
    # central difference along (di, dj) using only available neighbours
    fwd = _available(flag, i + di, j + dj)
    bwd = _available(flag, i - di, j - dj)
    if fwd and bwd:
        return (values[i + di, j + dj] - values[i - di, j - dj]) * 0.5
    if fwd:
        return values[i + di, j + dj] - own
    if bwd:
        return own - values[i - di, j - dj]
    return 0.0


@njit(cache=True)
def _channel_diff(img, c, i, j, di, dj, fwd, bwd):
    if fwd and bwd:
        return (img[i + di, j + dj, c] - img[i - di, j - dj, c]) * 0.5
    if fwd:
        return img[i + di, j + dj, c] - img[i, j, c]
    if bwd:
        return img[i, j, c] - img[i - di, j - dj, c]
    return 0.0


@njit(cache=True)
def _fill_pixel(img, flag, T, i, j, radius, acc):
    h, w, nch = img.shape
    gty = _axis_diff(T, flag, i, j, 1, 0, T[i, j])
    gtx = _axis_diff(T, flag, i, j, 0, 1, T[i, j])
    norm = np.sqrt(gtx * gtx + gty * gty)
    if norm > 0.0:
        gtx /= norm
        gty /= norm
    rad = int(np.ceil(radius))
    r2max = radius * radius
    acc[:] = 0.0
    wsum = 0.0
    for k in range(max(i - rad, 0), min(i + rad + 1, h)):
        for l in range(max(j - rad, 0), min(j + rad + 1, w)):
            if flag[k, l] == INSIDE:
                continue
            ry = float(i - k)
            rx = float(j - l)
            d2 = rx * rx + ry * ry
            if d2 == 0.0 or d2 > r2max:
                continue
            direction = abs(rx * gtx + ry * gty) / np.sqrt(d2)
            if direction < 1e-6:
                direction = 1e-6
            level = 1.0 / (1.0 + abs(T[k, l] - T[i, j]))
            wt = direction * level / d2
            right = _available(flag, k, l + 1)
            left = _available(flag, k, l - 1)
            down = _available(flag, k + 1, l)
            up = _available(flag, k - 1, l)
            for c in range(nch):
                gx = _channel_diff(img, c, k, l, 0, 1, right, left)
                gy = _channel_diff(img, c, k, l, 1, 0, down, up)
                acc[c] += wt * (img[k, l, c] + gx * rx + gy * ry)
            wsum += wt
    if wsum > 0.0:
        for c in range(nch):
            img[i, j, c] = min(max(acc[c] / wsum, 0.0), 1.0)


@njit(cache=True)
def telea_fill(img, hole, radius):
    """Fill ``hole`` pixels of ``img`` (H, W, C float64) in place."""
    h, w = hole.shape
    flag = np.full((h, w), KNOWN, dtype=np.uint8)
    T = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            if hole[i, j]:
                flag[i, j] = INSIDE
                T[i, j] = FAR
    heap = [(0.0, 0, 0, 0)]
    heap.pop()
    counter = 0
    for i in range(h):
        for j in range(w):
            if flag[i, j] != KNOWN:
                continue
            if ((i > 0 and hole[i - 1, j]) or (i < h - 1 and hole[i + 1, j])
                    or (j > 0 and hole[i, j - 1]) or (j < w - 1 and hole[i, j + 1])):
                flag[i, j] = BAND
                heapq.heappush(heap, (0.0, counter, i, j))
                counter += 1
    acc = np.zeros(img.shape[2])
    di = (-1, 1, 0, 0)
    dj = (0, 0, -1, 1)
    while len(heap) > 0:
        _, _, i, j = heapq.heappop(heap)
        if flag[i, j] == KNOWN:
            continue
        flag[i, j] = KNOWN
        for n in range(4):
            ni = i + di[n]
            nj = j + dj[n]
            if ni < 0 or ni >= h or nj < 0 or nj >= w or flag[ni, nj] != INSIDE:
                continue
            T[ni, nj] = _arrival(ni, nj, flag, T)
            _fill_pixel(img, flag, T, ni, nj, radius, acc)
            flag[ni, nj] = BAND
            heapq.heappush(heap, (T[ni, nj], counter, ni, nj))
            counter += 1
    return T
