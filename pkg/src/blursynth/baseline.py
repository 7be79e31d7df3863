"""Gradient-energy blur map, a training-free stand-in for a learned predictor."""

from __future__ import annotations

import numpy as np

from .blurkernel import gaussian_kernel
from .imagecore import as_image, to_luma
from .synthesis import convolve

DEFAULT_SCALES = (0.5, 1.0)


def gradient_energy(img, scales=DEFAULT_SCALES) -> np.ndarray:
    """Mean over ``scales`` of the central-difference gradient magnitude of smoothed luma."""
    luma = to_luma(as_image(img))
    energy = np.zeros_like(luma)
    for sigma in scales:
        smoothed = convolve(luma[:, :, None], gaussian_kernel(sigma))[:, :, 0]
        gy, gx = np.gradient(smoothed)
        energy += np.hypot(gx, gy)
    return energy / len(scales)


def sharpness_map(img, scales=DEFAULT_SCALES) -> np.ndarray:
    """Blurriness in ``[0, 1]``, higher = more blurred.

    ``b = 1 - e / (e + eps)`` where ``e`` is the multi-scale gradient energy
    and ``eps`` its image mean, which makes the map exposure independent.
    A gradient-free image maps to 1 everywhere.
    """
    if not scales:
        raise ValueError("at least one scale is required")
    e = gradient_energy(img, scales)
    eps = e.mean()
    if eps == 0.0:
        return np.ones_like(e)
    return eps / (e + eps)
