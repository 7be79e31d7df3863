"""Blur-mask extraction from semantic labels or scored object proposals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ProposalLoadError
from .imagecore import as_mask, ensure_dir, load_mask, save_mask

_STRUCTURES = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


@dataclass
class ScoredProposalSet:
    """Class-agnostic candidate masks with objectness scores (higher = more object-like)."""

    proposals: list[np.ndarray]
    scores: list[float]

    def __post_init__(self):
        if len(self.proposals) == 0:
            raise ValueError("proposal set is empty")
        if len(self.proposals) != len(self.scores):
            raise ValueError(
                f"{len(self.proposals)} proposals but {len(self.scores)} scores"
            )
        self.proposals = [as_mask(p) for p in self.proposals]
        shape = self.proposals[0].shape
        if any(p.shape != shape for p in self.proposals):
            raise ValueError("proposals differ in size")
        self.scores = [float(s) for s in self.scores]
        if not all(math.isfinite(s) for s in self.scores):
            raise ValueError("proposal scores must be finite")

    @property
    def shape(self) -> tuple[int, int]:
        return self.proposals[0].shape


def connected_components(mask, connectivity: int = 8):
    """Split the true pixels of ``mask`` into connected components.

    Returns ``(component_id, pixel_count, component_mask)`` tuples sorted by
    descending size; equal sizes are ordered by the row-major index of their
    first pixel. Ids are 1-based positions in that order.
    """
    mask = as_mask(mask)
    if connectivity not in _STRUCTURES:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    labeled, n = ndimage.label(mask, structure=_STRUCTURES[connectivity])
    if n == 0:
        return []
    flat = labeled.ravel()
    counts = np.bincount(flat, minlength=n + 1)[1:]
    # first row-major occurrence of each label
    nz = np.flatnonzero(flat)
    first = np.full(n, flat.size, dtype=np.int64)
    np.minimum.at(first, flat[nz] - 1, nz)
    order = np.lexsort((first, -counts))
    return [
        (rank + 1, int(counts[lab]), labeled == lab + 1)
        for rank, lab in enumerate(order)
    ]


def largest_object_mask(labels) -> np.ndarray:
    """Largest 8-connected blob of the most frequent non-background label.

    Label-count ties go to the smaller label value. An all-background map
    yields an all-false mask.
    """
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError(f"expected (H, W) label map, got shape {labels.shape}")
    if labels.size and labels.min() < 0:
        raise ValueError("label map contains negative labels")
    values, counts = np.unique(labels[labels != 0], return_counts=True)
    if values.size == 0:
        return np.zeros(labels.shape, dtype=bool)
    best = values[np.argmax(counts)]
    components = connected_components(labels == best, connectivity=8)
    return components[0][2]


def proposal_distribution(scores) -> np.ndarray:
    """Softmax over objectness scores (max-subtracted for stability)."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    if s.size == 0:
        raise ValueError("at least one score is required")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    e = np.exp(s - s.max())
    return e / e.sum()


def sample_index(probabilities, rng: np.random.Generator) -> int:
    """Inverse-CDF draw consuming exactly one uniform."""
    cdf = np.cumsum(probabilities)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), len(cdf) - 1))


def sample_proposal_mask(proposals: ScoredProposalSet, rng: np.random.Generator,
                         return_index: bool = False):
    idx = sample_index(proposal_distribution(proposals.scores), rng)
    mask = proposals.proposals[idx].copy()
    return (mask, idx) if return_index else mask


def maybe_invert(mask, p_inv: float, rng: np.random.Generator, return_flag: bool = False):
    """Complement ``mask`` with probability ``p_inv`` (one uniform draw)."""
    if not 0.0 <= p_inv <= 1.0:
        raise ValueError(f"p_inv must be in [0, 1], got {p_inv}")
    mask = as_mask(mask)
    inverted = bool(rng.random() < p_inv)
    out = ~mask if inverted else mask.copy()
    return (out, inverted) if return_flag else out


def load_proposals(directory) -> ScoredProposalSet:
    """Read ``proposal_NNNN.png`` files plus ``scores.txt`` (one score per line)."""
    directory = Path(directory)
    score_file = directory / "scores.txt"
    if not score_file.is_file():
        raise ProposalLoadError(f"{directory}: missing scores.txt")
    try:
        lines = [ln.strip() for ln in score_file.read_text().splitlines()]
        scores = [float(ln) for ln in lines if ln]
    except ValueError as exc:
        raise ProposalLoadError(f"{score_file}: {exc}") from exc
    files = sorted(directory.glob("proposal_*.png"))
    if len(files) != len(scores):
        raise ProposalLoadError(
            f"{directory}: {len(files)} proposal files but {len(scores)} scores"
        )
    expected = [f"proposal_{i:04d}.png" for i in range(len(files))]
    if [f.name for f in files] != expected:
        raise ProposalLoadError(f"{directory}: proposal files are not numbered 0000..{len(files) - 1:04d}")
    try:
        return ScoredProposalSet([load_mask(f) for f in files], scores)
    except ValueError as exc:
        raise ProposalLoadError(f"{directory}: {exc}") from exc


def save_proposals(proposals: ScoredProposalSet, directory) -> None:
    directory = ensure_dir(directory)
    for i, mask in enumerate(proposals.proposals):
        save_mask(mask, directory / f"proposal_{i:04d}.png")
    (directory / "scores.txt").write_text("".join(f"{s!r}\n" for s in proposals.scores))
