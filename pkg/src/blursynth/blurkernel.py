"""Defocus and non-linear motion blur kernels.

A kernel is a square, odd-sized, non-negative ``float64`` array with unit sum.
Motion kernels are built in three steps: a horizontal line of ``m`` pixels,
rotated by ``alpha`` degrees, then warped by a smooth random displacement
field so the trail bends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from .errors import ConfigError, DegenerateKernelError

KERNEL_SUM_TOL = 1e-9


def check_kernel(K) -> np.ndarray:
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1] or K.shape[0] % 2 == 0:
        raise ValueError(f"kernel must be square with odd size, got {K.shape}")
    if not np.all(np.isfinite(K)) or K.min() < 0:
        raise ValueError("kernel entries must be finite and non-negative")
    if abs(K.sum() - 1.0) > KERNEL_SUM_TOL:
        raise ValueError(f"kernel sums to {K.sum()!r}, not 1")
    return K


def delta_kernel(size: int = 1) -> np.ndarray:
    K = np.zeros((size, size))
    K[size // 2, size // 2] = 1.0
    return K


def _normalize(K: np.ndarray) -> np.ndarray:
    K = np.where(K > 0, K, 0.0)
    total = K.sum()
    if not total > 0:
        raise DegenerateKernelError("kernel has no remaining mass")
    return K / total


def cos_sin_deg(angle: float) -> tuple[float, float]:
    """cos/sin of an angle in degrees, exact at multiples of 90."""
    a = float(angle) % 360.0
    exact = {0.0: (1.0, 0.0), 90.0: (0.0, 1.0), 180.0: (-1.0, 0.0), 270.0: (0.0, -1.0)}
    if a in exact:
        return exact[a]
    r = math.radians(a)
    return math.cos(r), math.sin(r)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Sampled isotropic Gaussian, radius ``ceil(3 sigma)``, renormalized."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    r = int(math.ceil(3.0 * sigma))
    x = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    K = np.outer(g, g)
    return K / K.sum()


def linear_motion_kernel(m: int, size: Optional[int] = None) -> np.ndarray:
    """Horizontal line of ``m`` pixels with value ``1/m`` on the middle row.

    The support is ``m`` (odd ``m``) or ``m + 1`` (even ``m``). On an even
    split the spare column is left on the right, i.e. the line hugs the lower
    indices. ``size`` pads the support symmetrically to a larger odd size.
    """
    if int(m) != m or m < 1:
        raise ValueError(f"motion length must be an integer >= 1, got {m}")
    m = int(m)
    k = m if m % 2 else m + 1
    if size is None:
        size = k
    if size < k or size % 2 == 0:
        raise ValueError(f"size must be odd and >= {k}, got {size}")
    K = np.zeros((size, size))
    start = (size - k) // 2
    K[size // 2, start:start + m] = 1.0 / m
    return K


def bilinear_sample(K: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear read of ``K`` at real coordinates; reads outside the array are 0."""
    h, w = K.shape
    padded = np.zeros((h + 2, w + 2))
    padded[1:-1, 1:-1] = K
    # shift by one so that a one-pixel zero border absorbs out-of-range taps
    xs = np.clip(xs + 1.0, 0.0, w + 1.0)
    ys = np.clip(ys + 1.0, 0.0, h + 1.0)
    x0 = np.minimum(np.floor(xs).astype(np.intp), w)
    y0 = np.minimum(np.floor(ys).astype(np.intp), h)
    fx = xs - x0
    fy = ys - y0
    return (
        padded[y0, x0] * (1 - fx) * (1 - fy)
        + padded[y0, x0 + 1] * fx * (1 - fy)
        + padded[y0 + 1, x0] * (1 - fx) * fy
        + padded[y0 + 1, x0 + 1] * fx * fy
    )


def rotate_kernel(K, alpha: float) -> np.ndarray:
    """Rotate ``K`` about its center by ``alpha`` degrees, counter-clockwise as displayed."""
    K = np.asarray(K, dtype=np.float64)
    k = K.shape[0]
    c = (k - 1) / 2.0
    cos_a, sin_a = cos_sin_deg(alpha)
    v, u = np.mgrid[0:k, 0:k].astype(np.float64) - c
    src_x = u * cos_a - v * sin_a + c
    src_y = u * sin_a + v * cos_a + c
    return _normalize(bilinear_sample(K, src_x, src_y))


@dataclass
class DisplacementField:
    """Per-pixel offsets ``(dx, dy)`` over a ``k x k`` kernel grid."""

    dx: np.ndarray
    dy: np.ndarray

    def __post_init__(self):
        self.dx = np.asarray(self.dx, dtype=np.float64)
        self.dy = np.asarray(self.dy, dtype=np.float64)
        if self.dx.shape != self.dy.shape or self.dx.ndim != 2 or self.dx.shape[0] != self.dx.shape[1]:
            raise ValueError("displacement components must be equal square arrays")
        if not (np.all(np.isfinite(self.dx)) and np.all(np.isfinite(self.dy))):
            raise ValueError("displacement field must be finite")
        if self.magnitude().max() > self.size / 2.0 + 1e-9:
            raise ValueError("displacement magnitude exceeds half the kernel size")

    @property
    def size(self) -> int:
        return self.dx.shape[0]

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.dx, self.dy)

    @classmethod
    def zeros(cls, k: int) -> "DisplacementField":
        return cls(np.zeros((k, k)), np.zeros((k, k)))


def elastic_deform_kernel(K, fld: DisplacementField) -> np.ndarray:
    """Backward-warp: ``out(x, y) = K(x + dx, y + dy)``, bilinear, zero outside."""
    K = np.asarray(K, dtype=np.float64)
    if fld.size != K.shape[0]:
        raise ValueError(f"field size {fld.size} does not match kernel size {K.shape[0]}")
    k = K.shape[0]
    ys, xs = np.mgrid[0:k, 0:k].astype(np.float64)
    warped = bilinear_sample(K, xs + fld.dx, ys + fld.dy)
    try:
        return _normalize(warped)
    except DegenerateKernelError:
        raise DegenerateKernelError("elastic warp moved all kernel mass out of support") from None


def random_displacement_field(k: int, amplitude: float, smoothness: float,
                              rng: np.random.Generator) -> DisplacementField:
    """Uniform noise in ``[-1, 1]``, Gaussian-smoothed, scaled to peak ``amplitude``."""
    if k < 1 or k % 2 == 0:
        raise ValueError(f"field size must be odd, got {k}")
    if amplitude < 0:
        raise ValueError("amplitude must be non-negative")
    if not smoothness > 0:
        raise ValueError("smoothness must be positive")
    if amplitude > k / 2.0:
        raise ValueError(f"amplitude {amplitude} exceeds half the field size {k}")
    g = gaussian_kernel(smoothness)
    dx = ndimage.correlate(rng.uniform(-1.0, 1.0, (k, k)), g, mode="mirror")
    dy = ndimage.correlate(rng.uniform(-1.0, 1.0, (k, k)), g, mode="mirror")
    peak = np.hypot(dx, dy).max()
    if amplitude == 0 or peak == 0:
        return DisplacementField.zeros(k)
    scale = amplitude / peak
    return DisplacementField(dx * scale, dy * scale)


def motion_support(m: int, amplitude: float) -> int:
    """Odd kernel size holding a length-``m`` line plus room for the warp."""
    base = m if m % 2 else m + 1
    return base + 2 * int(math.ceil(amplitude))


@dataclass
class BlurSpec:
    """One randomized blur event.

    Defocus uses ``sigma``. Motion uses ``length``, ``angle`` and an elastic
    field regenerated from ``elastic_seed``, ``elastic_amplitude`` and
    ``elastic_smoothness``.
    """

    kind: str
    sigma: Optional[float] = None
    length: Optional[int] = None
    angle: Optional[float] = None
    elastic_amplitude: float = 0.0
    elastic_smoothness: float = 1.0
    elastic_seed: Optional[int] = None
    elastic: Optional[DisplacementField] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind == "defocus":
            if self.sigma is None or not self.sigma > 0:
                raise ValueError("defocus blur needs sigma > 0")
        elif self.kind == "motion":
            if self.length is None or int(self.length) != self.length or self.length < 1:
                raise ValueError("motion blur needs an integer length >= 1")
            self.length = int(self.length)
            if self.angle is None or not 0.0 <= self.angle < 360.0:
                raise ValueError("motion angle must be in [0, 360)")
        else:
            raise ValueError(f"unknown blur kind {self.kind!r}")

    @property
    def support(self) -> int:
        if self.kind == "defocus":
            return 2 * int(math.ceil(3.0 * self.sigma)) + 1
        return motion_support(self.length, self.elastic_amplitude)

    def elastic_field(self) -> DisplacementField:
        if self.elastic is not None:
            return self.elastic
        k = self.support
        if self.elastic_amplitude == 0 or self.elastic_seed is None:
            return DisplacementField.zeros(k)
        rng = np.random.default_rng(self.elastic_seed)
        return random_displacement_field(k, self.elastic_amplitude, self.elastic_smoothness, rng)

    def to_record(self) -> dict:
        if self.kind == "defocus":
            return {"blur_kind": "defocus", "sigma": self.sigma, "elastic_seed": None}
        return {
            "blur_kind": "motion",
            "m": self.length,
            "alpha": self.angle,
            "elastic_amplitude": self.elastic_amplitude,
            "elastic_smoothness": self.elastic_smoothness,
            "elastic_seed": self.elastic_seed,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "BlurSpec":
        if rec["blur_kind"] == "defocus":
            return cls("defocus", sigma=rec["sigma"])
        return cls(
            "motion",
            length=rec["m"],
            angle=rec["alpha"],
            elastic_amplitude=rec["elastic_amplitude"],
            elastic_smoothness=rec["elastic_smoothness"],
            elastic_seed=rec["elastic_seed"],
        )


def validate_blur_config(cfg) -> None:
    """Range checks for the blur fields of a generator config."""
    if not 0.0 <= cfg.motion_ratio <= 1.0:
        raise ConfigError("motion_ratio", "must be in [0, 1]")
    if not 0 < cfg.sigma_min <= cfg.sigma_max:
        raise ConfigError("sigma_range", "need 0 < sigma_min <= sigma_max")
    if not 1 <= cfg.m_min <= cfg.m_max:
        raise ConfigError("m_range", "need 1 <= m_min <= m_max")
    if not 0.0 <= cfg.elastic_amplitude_ratio <= 0.5:
        raise ConfigError("elastic_amplitude_ratio", "must be in [0, 0.5]")
    if not cfg.elastic_smoothness_ratio > 0:
        raise ConfigError("elastic_smoothness_ratio", "must be positive")


def sample_blur_spec(cfg, rng: np.random.Generator) -> BlurSpec:
    """Draw blur type and parameters from the ranges in ``cfg``."""
    validate_blur_config(cfg)
    if rng.random() < cfg.motion_ratio:
        m = int(rng.integers(cfg.m_min, cfg.m_max + 1))
        alpha = float(rng.uniform(0.0, 360.0))
        amplitude = float(cfg.elastic_amplitude_ratio * m * rng.random())
        seed = int(rng.integers(0, 2**63))
        return BlurSpec(
            "motion",
            length=m,
            angle=alpha % 360.0,
            elastic_amplitude=amplitude,
            elastic_smoothness=cfg.elastic_smoothness_ratio * m,
            elastic_seed=seed,
        )
    return BlurSpec("defocus", sigma=float(rng.uniform(cfg.sigma_min, cfg.sigma_max)))


def realize_kernel(spec: BlurSpec) -> np.ndarray:
    if spec.kind == "defocus":
        return gaussian_kernel(spec.sigma)
    line = linear_motion_kernel(spec.length, size=spec.support)
    return elastic_deform_kernel(rotate_kernel(line, spec.angle), spec.elastic_field())
