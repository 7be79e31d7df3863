"""Raster conventions and PNG/JPEG interchange.

Images are ``float64`` arrays of shape ``(H, W, C)`` with ``C`` in ``{1, 3}``
and samples in ``[0, 1]``. sRGB code values are used directly as intensities.
Masks are ``bool`` arrays of shape ``(H, W)``; ``True`` marks the region that
receives blur. Masks are stored as 8-bit grayscale PNG, 0 = sharp, 255 = blurred.
"""

from __future__ import annotations

import os
from pathlib import Path

import cv2
import numpy as np
from PIL import Image as PILImage

from .errors import ImageDecodeError, ImageWriteError, MaskFormatError

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def as_image(data) -> np.ndarray:
    """Validate ``data`` as an image, promoting ``(H, W)`` to ``(H, W, 1)``."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ValueError(f"expected (H, W[, 1|3]) image, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError("image has a zero dimension")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite samples")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("image samples outside [0, 1]")
    return arr


def as_mask(data) -> np.ndarray:
    arr = np.asarray(data)
    if arr.ndim != 2:
        raise ValueError(f"expected (H, W) mask, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError("mask has a zero dimension")
    return arr.astype(bool, copy=False)


def check_pair(img: np.ndarray, mask: np.ndarray) -> None:
    if img.shape[:2] != mask.shape:
        raise ValueError(f"image {img.shape[:2]} and mask {mask.shape} differ in size")


def to_luma(img: np.ndarray) -> np.ndarray:
    """Single-plane intensity: Rec.601 luma for color, the plane itself for gray."""
    img = as_image(img)
    if img.shape[2] == 1:
        return img[:, :, 0].copy()
    return img @ LUMA_WEIGHTS


def quantize8(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def _read_raw(path) -> np.ndarray:
    path = Path(path)
    try:
        buf = np.fromfile(path, dtype=np.uint8)
    except OSError as exc:
        raise ImageDecodeError(f"{path}: {exc}") from exc
    raw = cv2.imdecode(buf, cv2.IMREAD_UNCHANGED) if buf.size else None
    if raw is None:
        raise ImageDecodeError(f"{path}: not a decodable PNG/JPEG file")
    return raw


def _normalize(raw: np.ndarray, origin) -> np.ndarray:
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise ImageDecodeError(f"{origin}: unsupported sample type {raw.dtype}")
    if raw.ndim == 2:
        data = raw[:, :, None]
    elif raw.shape[2] == 2:
        data = raw[:, :, :1]
    elif raw.shape[2] in (3, 4):
        data = raw[:, :, 2::-1]  # BGR(A) -> RGB, alpha dropped
    else:
        raise ImageDecodeError(f"{origin}: unsupported channel count {raw.shape[2]}")
    return np.ascontiguousarray(data, dtype=np.float64) / scale


def load_image(path) -> np.ndarray:
    """Decode a PNG or JPEG into an ``(H, W, C)`` float image in ``[0, 1]``."""
    return _normalize(_read_raw(path), path)


def decode_image(data: bytes) -> np.ndarray:
    raw = cv2.imdecode(np.frombuffer(data, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageDecodeError("<bytes>: not a decodable PNG/JPEG stream")
    return _normalize(raw, "<bytes>")


def _to_cv(img: np.ndarray) -> np.ndarray:
    q = quantize8(img)
    if q.shape[2] == 1:
        return q[:, :, 0]
    return np.ascontiguousarray(q[:, :, ::-1])


def encode_image(img: np.ndarray, format: str = "png", jpeg_quality: int = 95) -> bytes:
    img = as_image(img)
    if format == "png":
        ok, buf = cv2.imencode(".png", _to_cv(img))
    elif format in ("jpeg", "jpg"):
        if not 1 <= int(jpeg_quality) <= 100:
            raise ValueError(f"jpeg_quality must be in 1..100, got {jpeg_quality}")
        ok, buf = cv2.imencode(".jpg", _to_cv(img), [cv2.IMWRITE_JPEG_QUALITY, int(jpeg_quality)])
    else:
        raise ValueError(f"unknown format {format!r}")
    if not ok:
        raise ImageWriteError(f"encoder failed for format {format}")
    return buf.tobytes()


def _write_bytes(data: bytes, path) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise ImageWriteError(f"{path}: {exc}") from exc


def save_image(img: np.ndarray, path, format: str | None = None, jpeg_quality: int = 95) -> None:
    """Write ``img`` as an 8-bit PNG or JPEG. ``format`` defaults from the suffix."""
    if format is None:
        format = "jpeg" if Path(path).suffix.lower() in (".jpg", ".jpeg") else "png"
    _write_bytes(encode_image(img, format, jpeg_quality), path)


def jpeg_roundtrip(img: np.ndarray, quality: int) -> np.ndarray:
    return decode_image(encode_image(img, "jpeg", quality))


def encode_mask(mask: np.ndarray) -> bytes:
    mask = as_mask(mask)
    ok, buf = cv2.imencode(".png", mask.astype(np.uint8) * 255)
    if not ok:
        raise ImageWriteError("mask encoder failed")
    return buf.tobytes()


def save_mask(mask: np.ndarray, path) -> None:
    _write_bytes(encode_mask(mask), path)


def _mask_from_raw(raw: np.ndarray, threshold: float, origin) -> np.ndarray:
    plane = _normalize(raw, origin)
    if plane.shape[2] == 3 and not (
        np.array_equal(plane[:, :, 0], plane[:, :, 1]) and np.array_equal(plane[:, :, 0], plane[:, :, 2])
    ):
        raise MaskFormatError(f"{origin}: multi-channel mask with unequal channels")
    return plane[:, :, 0] >= threshold


def load_mask(path, threshold: float = 0.5) -> np.ndarray:
    """Read a mask PNG; a pixel is ``True`` iff its normalized value >= ``threshold``."""
    return _mask_from_raw(_read_raw(path), threshold, path)


def decode_mask(data: bytes, threshold: float = 0.5) -> np.ndarray:
    raw = cv2.imdecode(np.frombuffer(data, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageDecodeError("<bytes>: not a decodable PNG stream")
    return _mask_from_raw(raw, threshold, "<bytes>")


def load_label_map(path, ignore=(255,)) -> np.ndarray:
    """Read an indexed or grayscale label PNG into an integer ``(H, W)`` array.

    Palette PNGs keep their indices. Labels listed in ``ignore`` (the VOC
    boundary code by default) are folded into background 0.
    """
    try:
        with PILImage.open(path) as im:
            if im.mode not in ("P", "L", "I", "I;16"):
                raise MaskFormatError(f"{path}: label map must be indexed or grayscale, got {im.mode}")
            labels = np.array(im, dtype=np.int64)
    except OSError as exc:
        raise ImageDecodeError(f"{path}: {exc}") from exc
    for value in ignore:
        labels[labels == value] = 0
    return labels


def list_images(directory) -> list[Path]:
    directory = Path(directory)
    return sorted(
        p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )


def resize_bilinear(img: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Bilinear resize with pixel-center alignment and edge clamping.

    ``size`` is ``(height, width)``. Works on ``(H, W)`` and ``(H, W, C)`` arrays.
    """
    img = np.asarray(img, dtype=np.float64)
    out_h, out_w = size
    in_h, in_w = img.shape[:2]
    if (out_h, out_w) == (in_h, in_w):
        return img.copy()
    y0, y1, wy = _linear_taps(in_h, out_h)
    x0, x1, wx = _linear_taps(in_w, out_w)
    extra = (None,) * (img.ndim - 2)
    wy = wy[(slice(None), None) + extra]
    wx = wx[(None, slice(None)) + extra]
    top = img[y0][:, x0] * (1 - wx) + img[y0][:, x1] * wx
    bottom = img[y1][:, x0] * (1 - wx) + img[y1][:, x1] * wx
    return top * (1 - wy) + bottom * wy


def _linear_taps(n_in: int, n_out: int):
    pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    pos = np.clip(pos, 0.0, n_in - 1)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, pos - lo


def resize_nearest(arr: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    out_h, out_w = size
    in_h, in_w = arr.shape[:2]
    rows = np.minimum(((np.arange(out_h) + 0.5) * (in_h / out_h)).astype(np.intp), in_h - 1)
    cols = np.minimum(((np.arange(out_w) + 0.5) * (in_w / out_w)).astype(np.intp), in_w - 1)
    return arr[rows][:, cols]


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    mse = float(np.mean((np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(1.0 / mse)


def ensure_dir(path) -> Path:
    path = Path(path)
    os.makedirs(path, exist_ok=True)
    return path


def save_map(values: np.ndarray, path, bits: int = 16) -> None:
    """Write a single-channel ``[0, 1]`` map as an 8- or 16-bit grayscale PNG."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    if v.ndim == 3:
        v = v[:, :, 0]
    if bits == 16:
        q = np.round(v * 65535.0).astype(np.uint16)
    elif bits == 8:
        q = np.round(v * 255.0).astype(np.uint8)
    else:
        raise ValueError("bits must be 8 or 16")
    ok, buf = cv2.imencode(".png", q)
    if not ok:
        raise ImageWriteError(f"{path}: encoder failed")
    _write_bytes(buf.tobytes(), path)
