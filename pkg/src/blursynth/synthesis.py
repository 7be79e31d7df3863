"""Partial blur synthesis.

``synthesize_naive`` blurs the whole image and pastes the sharp region back,
which smears sharp-region colors across the mask boundary (halo).
``synthesize_halo_free`` first inpaints the sharp region from its surroundings
so that the blur only mixes blurred-region content.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage, signal

from ._telea import telea_fill
from .blurkernel import check_kernel
from .errors import DegenerateMaskError, UninpaintableError
from .imagecore import as_image, as_mask, check_pair, to_luma

DEFAULT_INPAINT_RADIUS = 5.0

# kernels with more taps than this go through the FFT path
_DIRECT_TAPS = 15 * 15


def _separable_factors(K: np.ndarray):
    col = K.sum(axis=1)
    row = K.sum(axis=0)
    if np.allclose(np.outer(col, row), K, rtol=0.0, atol=1e-14 * K.max()):
        return col, row
    return None


def convolve(img, K) -> np.ndarray:
    """Per-channel 2D correlation of ``img`` with ``K``; reflect-101 borders.

    The output keeps the input size and is clamped to ``[0, 1]``.
    """
    img = as_image(img)
    K = check_kernel(K)
    k = K.shape[0]
    h, w = img.shape[:2]
    if k >= 2 * h or k >= 2 * w:
        raise ValueError(f"kernel of size {k} too large for a {h}x{w} image")
    factors = _separable_factors(K)
    if factors is not None:
        col, row = factors
        out = ndimage.correlate1d(img, col, axis=0, mode="mirror")
        out = ndimage.correlate1d(out, row, axis=1, mode="mirror")
    elif K.size <= _DIRECT_TAPS:
        out = np.empty_like(img)
        for c in range(img.shape[2]):
            out[:, :, c] = ndimage.correlate(img[:, :, c], K, mode="mirror")
    else:
        r = k // 2
        padded = np.pad(img, ((r, r), (r, r), (0, 0)), mode="reflect")
        flipped = K[::-1, ::-1]
        out = np.empty_like(img)
        for c in range(img.shape[2]):
            out[:, :, c] = signal.fftconvolve(padded[:, :, c], flipped, mode="valid")
    return np.clip(out, 0.0, 1.0)


def composite(sharp, blurred, mask) -> np.ndarray:
    """``blurred`` where ``mask`` is true, ``sharp`` elsewhere."""
    sharp = np.asarray(sharp, dtype=np.float64)
    blurred = np.asarray(blurred, dtype=np.float64)
    mask = as_mask(mask)
    if sharp.shape != blurred.shape:
        raise ValueError(f"image shapes differ: {sharp.shape} vs {blurred.shape}")
    check_pair(sharp, mask)
    return np.where(mask[:, :, None], blurred, sharp)


def inpaint(img, hole, radius: float = DEFAULT_INPAINT_RADIUS) -> np.ndarray:
    """Fill ``hole`` by fast-marching inpainting; other pixels are untouched."""
    img = as_image(img)
    hole = as_mask(hole)
    check_pair(img, hole)
    if not radius >= 1:
        raise ValueError(f"inpaint radius must be >= 1, got {radius}")
    if not hole.any():
        return img.copy()
    if hole.all():
        raise UninpaintableError("hole covers the whole image")
    out = np.ascontiguousarray(img, dtype=np.float64).copy()
    telea_fill(out, np.ascontiguousarray(hole), float(radius))
    return out


def synthesize_naive(img, mask, K) -> np.ndarray:
    img = as_image(img)
    return composite(img, convolve(img, K), mask)


def synthesize_halo_free(img, mask, K, inpaint_radius: float = DEFAULT_INPAINT_RADIUS) -> np.ndarray:
    """Blur the ``mask`` region after inpainting away the sharp region.

    Pixels outside ``mask`` are returned unchanged.
    """
    img = as_image(img)
    mask = as_mask(mask)
    check_pair(img, mask)
    if not mask.any():
        raise DegenerateMaskError("blur mask is empty")
    if mask.all():
        raise DegenerateMaskError("blur mask leaves no sharp region")
    background = inpaint(img, ~mask, inpaint_radius)
    return composite(img, convolve(background, K), mask)


def boundary_band_gradient(img, mask, width: float = 3.0) -> float:
    """Mean luma gradient magnitude in the blurred-side band along the mask edge.

    The band holds blurred pixels within ``width`` (Euclidean) of the sharp
    region. Differences are taken only between pairs of blurred pixels, so
    the legitimate sharp/blurred step itself does not count; what remains is
    the smear a blur leaves next to the boundary.
    """
    luma = to_luma(img)
    mask = as_mask(mask)
    band = mask & (ndimage.distance_transform_edt(mask) <= width)
    if not band.any():
        return 0.0
    gx = _one_sided_diff(luma, mask, axis=1)
    gy = _one_sided_diff(luma, mask, axis=0)
    return float(np.hypot(gx, gy)[band].mean())


def _one_sided_diff(plane, valid, axis):
    # forward difference where the forward neighbour is valid, else backward
    fwd = np.zeros_like(plane)
    ok_f = np.zeros(plane.shape, dtype=bool)
    lo = [slice(None)] * 2
    hi = [slice(None)] * 2
    lo[axis] = slice(0, -1)
    hi[axis] = slice(1, None)
    lo, hi = tuple(lo), tuple(hi)
    pair_ok = valid[lo] & valid[hi]
    diff = plane[hi] - plane[lo]
    fwd[lo] = np.where(pair_ok, diff, 0.0)
    ok_f[lo] = pair_ok
    bwd = np.zeros_like(plane)
    ok_b = np.zeros(plane.shape, dtype=bool)
    bwd[hi] = np.where(pair_ok, diff, 0.0)
    ok_b[hi] = pair_ok
    return np.where(ok_f, fwd, np.where(ok_b, bwd, 0.0))
