"""Joint image/mask augmentations.

Images are resampled bilinearly, masks by nearest neighbour so they stay
boolean. Every random transform is split into a parameter draw and a
deterministic ``apply_*`` function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .blurkernel import cos_sin_deg
from .imagecore import (
    LUMA_WEIGHTS,
    as_image,
    as_mask,
    check_pair,
    jpeg_roundtrip,
    resize_bilinear,
    resize_nearest,
)

OUTPUT_SIZE = (224, 224)


@dataclass
class AugmentConfig:
    max_rotation: float = 15.0
    max_translation: float = 0.10
    scale_range: tuple[float, float] = (0.9, 1.1)
    flip_prob: float = 0.5
    brightness_range: tuple[float, float] = (0.8, 1.2)
    contrast_range: tuple[float, float] = (0.8, 1.2)
    saturation_range: tuple[float, float] = (0.8, 1.2)
    crop_fraction_range: tuple[float, float] = (0.6, 1.0)
    output_size: tuple[int, int] = OUTPUT_SIZE
    jpeg_quality_range: tuple[int, int] = (30, 95)
    jpeg_prob: float = 0.5


@dataclass(frozen=True)
class AffineParams:
    angle: float = 0.0
    translate: tuple[float, float] = (0.0, 0.0)  # (tx, ty) in pixels
    scale: float = 1.0
    hflip: bool = False

    def is_identity(self) -> bool:
        return (self.angle % 360.0 == 0.0 and self.translate == (0.0, 0.0)
                and self.scale == 1.0 and not self.hflip)


@dataclass(frozen=True)
class JitterParams:
    brightness: float = 1.0
    contrast: float = 1.0
    saturation: float = 1.0


def _forward_matrix(params: AffineParams, h: int, w: int) -> np.ndarray:
    """3x3 map from input (row, col) to output (row, col)."""
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    cos_a, sin_a = cos_sin_deg(params.angle)
    s = params.scale
    flip = np.eye(3)
    if params.hflip:
        flip = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, w - 1.0], [0.0, 0.0, 1.0]])
    to_center = np.array([[1.0, 0.0, -cy], [0.0, 1.0, -cx], [0.0, 0.0, 1.0]])
    # counter-clockwise on screen in (row, col) coordinates
    rot = np.array([[s * cos_a, -s * sin_a, 0.0], [s * sin_a, s * cos_a, 0.0], [0.0, 0.0, 1.0]])
    tx, ty = params.translate
    back = np.array([[1.0, 0.0, cy + ty], [0.0, 1.0, cx + tx], [0.0, 0.0, 1.0]])
    return back @ rot @ to_center @ flip


def apply_affine(img, mask, params: AffineParams):
    img = as_image(img)
    mask = as_mask(mask)
    check_pair(img, mask)
    if params.is_identity():
        return img.copy(), mask.copy()
    h, w = mask.shape
    inv = np.linalg.inv(_forward_matrix(params, h, w))
    # snap round-off so that axis-aligned maps hit pixel centres exactly
    inv = np.where(np.abs(inv - np.round(inv)) < 1e-12, np.round(inv), inv)
    matrix, offset = inv[:2, :2], inv[:2, 2]
    out = np.empty_like(img)
    for c in range(img.shape[2]):
        out[:, :, c] = ndimage.affine_transform(
            img[:, :, c], matrix, offset, order=1, mode="mirror", prefilter=False
        )
    out_mask = ndimage.affine_transform(
        mask.astype(np.uint8), matrix, offset, order=0, mode="constant", cval=0, prefilter=False
    ).astype(bool)
    return np.clip(out, 0.0, 1.0), out_mask


def draw_affine(shape, cfg: AugmentConfig, rng: np.random.Generator) -> AffineParams:
    h, w = shape[:2]
    angle = float(rng.uniform(-cfg.max_rotation, cfg.max_rotation))
    tx = float(rng.uniform(-cfg.max_translation, cfg.max_translation) * w)
    ty = float(rng.uniform(-cfg.max_translation, cfg.max_translation) * h)
    scale = float(rng.uniform(*cfg.scale_range))
    hflip = bool(rng.random() < cfg.flip_prob)
    return AffineParams(angle, (tx, ty), scale, hflip)


def random_affine(img, mask, cfg: AugmentConfig, rng: np.random.Generator):
    """Same random rotation/translation/scale/flip on image and mask."""
    return apply_affine(img, mask, draw_affine(mask.shape, cfg, rng))


def apply_color_jitter(img, params: JitterParams) -> np.ndarray:
    """Brightness (scale), contrast (about 0.5), then saturation (about luma)."""
    img = as_image(img)
    out = img.copy()
    # unit factors are skipped so that they are exact no-ops
    if params.brightness != 1.0:
        out = np.clip(out * params.brightness, 0.0, 1.0)
    if params.contrast != 1.0:
        out = np.clip(0.5 + params.contrast * (out - 0.5), 0.0, 1.0)
    if img.shape[2] == 3 and params.saturation != 1.0:
        gray = (out @ LUMA_WEIGHTS)[:, :, None]
        out = np.clip(gray + params.saturation * (out - gray), 0.0, 1.0)
    return out


def color_jitter(img, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    params = JitterParams(
        float(rng.uniform(*cfg.brightness_range)),
        float(rng.uniform(*cfg.contrast_range)),
        float(rng.uniform(*cfg.saturation_range)),
    )
    return apply_color_jitter(img, params)


def apply_crop_resize(img, mask, window, out_size=OUTPUT_SIZE):
    """Crop ``window = (top, left, height, width)`` and resize to ``out_size``."""
    top, left, ch, cw = window
    img = img[top:top + ch, left:left + cw]
    mask = mask[top:top + ch, left:left + cw]
    return resize_bilinear(img, out_size), resize_nearest(mask, out_size)


def draw_crop(shape, cfg: AugmentConfig, rng: np.random.Generator):
    h, w = shape[:2]
    fy = rng.uniform(*cfg.crop_fraction_range)
    fx = rng.uniform(*cfg.crop_fraction_range)
    ch = max(1, min(h, int(round(fy * h))))
    cw = max(1, min(w, int(round(fx * w))))
    top = int(rng.integers(0, h - ch + 1))
    left = int(rng.integers(0, w - cw + 1))
    return top, left, ch, cw


def random_crop_resize(img, mask, cfg: AugmentConfig, rng: np.random.Generator):
    img = as_image(img)
    mask = as_mask(mask)
    check_pair(img, mask)
    if min(mask.shape) < 64:
        raise ValueError(f"image {mask.shape} is smaller than 64 px on a side")
    return apply_crop_resize(img, mask, draw_crop(mask.shape, cfg, rng), cfg.output_size)


def jpeg_augment(img, quality_range, p_apply: float, rng: np.random.Generator) -> np.ndarray:
    """JPEG encode/decode at a random quality, with probability ``p_apply``.

    Always consumes two draws so the random stream does not depend on the outcome.
    """
    img = as_image(img)
    qlo, qhi = quality_range
    apply = rng.random() < p_apply
    quality = int(rng.integers(qlo, qhi + 1))
    if not apply:
        return img.copy()
    return jpeg_roundtrip(img, quality)


def augment_pair(img, mask, cfg: AugmentConfig, rng: np.random.Generator):
    """Affine/flip, crop-resize, color jitter, JPEG, in that order."""
    img, mask = random_affine(img, mask, cfg, rng)
    img, mask = random_crop_resize(img, mask, cfg, rng)
    img = color_jitter(img, cfg, rng)
    img = jpeg_augment(img, cfg.jpeg_quality_range, cfg.jpeg_prob, rng)
    return img, mask
