"""Procedural textured scenes with object labels and proposals.

Used to exercise the generator and evaluator without downloading a dataset.
Each scene is a multi-scale noise texture with a handful of textured
ellipses and rectangles on top.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage

from .imagecore import ensure_dir, save_image
from .maskops import ScoredProposalSet, save_proposals


def _texture(rng, shape, scales=(0.7, 2.0, 6.0)):
    h, w = shape
    tex = np.zeros((h, w, 3))
    for s in scales:
        noise = rng.standard_normal((h, w, 3))
        layer = ndimage.gaussian_filter(noise, sigma=(s, s, 0))
        tex += layer / (layer.std() + 1e-12)
    tex /= len(scales)
    return tex


def _shape_mask(rng, shape):
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w]
    cy, cx = rng.uniform(0.2, 0.8) * h, rng.uniform(0.2, 0.8) * w
    ry, rx = rng.uniform(0.12, 0.3) * h, rng.uniform(0.12, 0.3) * w
    if rng.random() < 0.6:
        return ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
    return (np.abs(yy - cy) <= ry) & (np.abs(xx - cx) <= rx)


def textured_scene(rng: np.random.Generator, shape=(120, 160), n_objects: int = 3):
    """Return ``(image, label_map)``; label ``k`` marks the k-th object (1-based)."""
    base = rng.uniform(0.25, 0.75, 3)
    img = base + 0.12 * _texture(rng, shape)
    labels = np.zeros(shape, dtype=np.int64)
    for k in range(1, n_objects + 1):
        m = _shape_mask(rng, shape)
        color = rng.uniform(0.15, 0.85, 3)
        img[m] = color + 0.15 * _texture(rng, shape)[m]
        labels[m] = k
    return np.clip(img, 0.0, 1.0), labels


def proposals_from_labels(labels: np.ndarray, rng: np.random.Generator) -> ScoredProposalSet:
    """Object masks, their unions, and a few random blobs, with noisy scores."""
    ids = [k for k in np.unique(labels) if k != 0]
    masks, scores = [], []
    for k in ids:
        masks.append(labels == k)
        scores.append(rng.normal(2.0, 0.5))
    if len(ids) > 1:
        masks.append(np.isin(labels, ids[:2]))
        scores.append(rng.normal(1.0, 0.5))
    for _ in range(2):
        masks.append(_shape_mask(rng, labels.shape))
        scores.append(rng.normal(0.0, 0.5))
    return ScoredProposalSet(masks, scores)


def write_corpus(root, n_images: int, seed: int = 0, shape=(120, 160)) -> Path:
    """Write ``images/``, ``labels/`` and ``proposals/<stem>/`` under ``root``."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    img_dir = ensure_dir(root / "images")
    lab_dir = ensure_dir(root / "labels")
    prop_dir = ensure_dir(root / "proposals")
    for i in range(n_images):
        stem = f"scene_{i:04d}"
        img, labels = textured_scene(rng, shape)
        save_image(img, img_dir / f"{stem}.png")
        PILImage.fromarray(labels.astype(np.uint8), mode="L").save(lab_dir / f"{stem}.png")
        save_proposals(proposals_from_labels(labels, rng), prop_dir / stem)
    return root
