"""Deterministic, parallel generation of (blurred image, blur mask) pairs.

Every sample is a pure function of ``(master_seed, image_index,
sample_index)``: a per-sample seed is hashed from that triple, so the output
does not depend on how samples are spread over worker processes.

On-disk layout written by :func:`generate_dataset`::

    out/images/{id}.png    blurred 8-bit RGB (or gray) image
    out/masks/{id}.png     ground-truth mask, 0 = sharp, 255 = blurred
    out/manifest.jsonl     one JSON record per sample, in index order
    out/config.json        the content-affecting configuration

Stream record format (:func:`stream_samples`)::

    uint32 little-endian payload length N
    N payload bytes = image PNG | mask PNG | manifest record (UTF-8 JSON)

PNGs are self-delimiting (chunks up to IEND), which is how
:func:`read_stream` splits the payload.
"""

from __future__ import annotations

import dataclasses
import hashlib
import itertools
import json
import logging
import os
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .augment import AugmentConfig, augment_pair
from .blurkernel import BlurSpec, realize_kernel, sample_blur_spec, validate_blur_config
from .errors import (
    ConfigError,
    DegenerateKernelError,
    DegenerateMaskError,
    ImageWriteError,
    SkipSampleError,
)
from .imagecore import (
    decode_image,
    decode_mask,
    encode_image,
    encode_mask,
    ensure_dir,
    list_images,
    load_image,
    load_label_map,
)
from .maskops import (
    connected_components,
    load_proposals,
    maybe_invert,
    sample_proposal_mask,
)
from .synthesis import synthesize_halo_free

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
MAX_ATTEMPTS = 8
INCOMPLETE_MARKER = "INCOMPLETE"

# Training constants reported alongside the method; kept for downstream
# trainers, unused here.
TRAIN_BATCH_SIZE = 18
TRAIN_LEARNING_RATE = 1e-5
TRAIN_WEIGHT_DECAY = 5e-4

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


@dataclass
class GeneratorConfig:
    source: str
    mask_mode: str = "proposals"
    proposal_dir: Optional[str] = None
    label_dir: Optional[str] = None
    p_inv: float = 0.5
    motion_ratio: float = 0.5
    sigma_min: float = 1.0
    sigma_max: float = 5.0
    m_min: int = 5
    m_max: int = 31
    elastic_amplitude_ratio: float = 0.25
    elastic_smoothness_ratio: float = 0.25
    inpaint_radius: float = 5.0
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    samples_per_image: int = 1
    master_seed: int = 0
    workers: int = 1
    output: Optional[str] = None

    def validate(self) -> "GeneratorConfig":
        if self.mask_mode not in ("proposals", "labels"):
            raise ConfigError("mask_mode", f"must be 'proposals' or 'labels', got {self.mask_mode!r}")
        if self.mask_mode == "proposals" and not self.proposal_dir:
            raise ConfigError("proposal_dir", "required when mask_mode is 'proposals'")
        if self.mask_mode == "labels" and not self.label_dir:
            raise ConfigError("label_dir", "required when mask_mode is 'labels'")
        if not 0.0 <= self.p_inv <= 1.0:
            raise ConfigError("p_inv", "must be in [0, 1]")
        validate_blur_config(self)
        if not self.inpaint_radius >= 1:
            raise ConfigError("inpaint_radius", "must be >= 1")
        if self.samples_per_image < 1:
            raise ConfigError("samples_per_image", "must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed", "must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        _validate_augment(self.augment)
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["augment"] = {k: list(v) if isinstance(v, tuple) else v for k, v in d["augment"].items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        d = dict(d)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown config field")
        aug = d.pop("augment", None) or {}
        aug_names = {f.name for f in dataclasses.fields(AugmentConfig)}
        if set(aug) - aug_names:
            raise ConfigError("augment." + sorted(set(aug) - aug_names)[0], "unknown config field")
        aug = {k: tuple(v) if isinstance(v, list) else v for k, v in aug.items()}
        if "source" not in d:
            raise ConfigError("source", "required")
        return cls(augment=AugmentConfig(**aug), **d)

    def content_dict(self) -> dict:
        """Every field that affects generated content (no workers/output)."""
        d = self.to_dict()
        d.pop("workers")
        d.pop("output")
        return d

    def content_hash(self) -> str:
        blob = json.dumps(self.content_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _validate_augment(a: AugmentConfig) -> None:
    for name in ("scale_range", "brightness_range", "contrast_range", "saturation_range",
                 "crop_fraction_range", "jpeg_quality_range"):
        lo, hi = getattr(a, name)
        if not lo <= hi:
            raise ConfigError(f"augment.{name}", "need lo <= hi")
    lo, hi = a.crop_fraction_range
    if not 0 < lo <= hi <= 1:
        raise ConfigError("augment.crop_fraction_range", "must lie in (0, 1]")
    lo, hi = a.jpeg_quality_range
    if not 1 <= lo <= hi <= 100:
        raise ConfigError("augment.jpeg_quality_range", "must lie in 1..100")
    for name in ("flip_prob", "jpeg_prob"):
        if not 0.0 <= getattr(a, name) <= 1.0:
            raise ConfigError(f"augment.{name}", "must be in [0, 1]")
    if a.max_rotation < 0 or a.max_translation < 0:
        raise ConfigError("augment", "rotation and translation limits must be non-negative")


@dataclass
class SampleMeta:
    id: str
    source_image: str
    image_index: int
    sample_index: int
    blur: BlurSpec
    mask_source: str
    inverted: bool
    sample_seed: int

    def record(self) -> dict:
        rec = {
            "id": self.id,
            "image_path": f"images/{self.id}.png",
            "mask_path": f"masks/{self.id}.png",
            "source_image": self.source_image,
            "image_index": self.image_index,
            "sample_index": self.sample_index,
        }
        rec.update(self.blur.to_record())
        rec.update({
            "mask_source": self.mask_source,
            "inverted": self.inverted,
            "sample_seed": self.sample_seed,
            "schema_version": SCHEMA_VERSION,
        })
        return rec


@dataclass
class SamplePair:
    image: np.ndarray
    mask: np.ndarray
    meta: SampleMeta


@dataclass
class Manifest:
    path: Path
    records: list[dict]
    skipped: list[tuple[int, int, str]]
    sha256: str


def sample_seed(master_seed: int, image_index: int, sample_index: int, attempt: int = 0) -> int:
    """64-bit per-sample seed hashed from the index triple (and retry attempt)."""
    words = [master_seed, image_index, sample_index]
    if attempt:
        words.append(attempt)
    state = np.random.SeedSequence(words).generate_state(1, dtype=np.uint64)
    return int(state[0])


def sample_id(image_index: int, sample_index: int) -> str:
    return f"{image_index:06d}_{sample_index:04d}"


@lru_cache(maxsize=4)
def _source_list(source: str) -> tuple[Path, ...]:
    return tuple(list_images(source))


def source_images(cfg: GeneratorConfig) -> tuple[Path, ...]:
    if not Path(cfg.source).is_dir():
        raise ConfigError("source", f"{cfg.source} is not a directory")
    images = _source_list(str(Path(cfg.source).resolve()))
    if not images:
        raise ConfigError("source", f"no PNG/JPEG images in {cfg.source}")
    return images


@lru_cache(maxsize=8)
def _load_image_cached(path: str) -> np.ndarray:
    img = load_image(path)
    img.setflags(write=False)
    return img


@lru_cache(maxsize=8)
def _load_proposals_cached(path: str):
    return load_proposals(path)


def _extract_mask(cfg: GeneratorConfig, stem: str, shape, rng: np.random.Generator):
    if cfg.mask_mode == "labels":
        labels = load_label_map(Path(cfg.label_dir) / f"{stem}.png")
        if labels.shape != shape:
            raise ValueError(f"label map for {stem} has shape {labels.shape}, image {shape}")
        values, counts = np.unique(labels[labels != 0], return_counts=True)
        if values.size == 0:
            return np.zeros(shape, dtype=bool), "label:none"
        best = int(values[np.argmax(counts)])
        return connected_components(labels == best, 8)[0][2], f"label:{best}"
    proposals = _load_proposals_cached(str(Path(cfg.proposal_dir) / stem))
    if proposals.shape != shape:
        raise ValueError(f"proposals for {stem} have shape {proposals.shape}, image {shape}")
    mask, idx = sample_proposal_mask(proposals, rng, return_index=True)
    return mask, f"proposal:{idx}"


def synthesize_from_seed(cfg: GeneratorConfig, image_index: int, seed: int,
                         sample_index: int = 0) -> SamplePair:
    """Run the full chain for one sample from an explicit per-sample seed."""
    path = source_images(cfg)[image_index]
    img = _load_image_cached(str(path))
    rng = np.random.default_rng(seed)
    mask, provenance = _extract_mask(cfg, path.stem, img.shape[:2], rng)
    mask, inverted = maybe_invert(mask, cfg.p_inv, rng, return_flag=True)
    if not mask.any() or mask.all():
        raise DegenerateMaskError(f"{path.name}: blur mask is {'empty' if not mask.any() else 'full'}")
    spec = sample_blur_spec(cfg, rng)
    K = realize_kernel(spec)
    blurred = synthesize_halo_free(img, mask, K, cfg.inpaint_radius)
    out_img, out_mask = augment_pair(blurred, mask, cfg.augment, rng)
    meta = SampleMeta(
        id=sample_id(image_index, sample_index),
        source_image=path.name,
        image_index=image_index,
        sample_index=sample_index,
        blur=spec,
        mask_source=provenance,
        inverted=inverted,
        sample_seed=seed,
    )
    return SamplePair(out_img, out_mask, meta)


def generate_sample(cfg: GeneratorConfig, image_index: int, sample_index: int) -> SamplePair:
    """Deterministic sample for ``(cfg.master_seed, image_index, sample_index)``.

    Degenerate masks or kernels are retried with a perturbed seed, up to
    ``MAX_ATTEMPTS`` times in total.
    """
    n_images = len(source_images(cfg))
    if not 0 <= image_index < n_images:
        raise IndexError(f"image_index {image_index} out of range 0..{n_images - 1}")
    if sample_index < 0:
        raise IndexError("sample_index must be non-negative")
    reasons = []
    for attempt in range(MAX_ATTEMPTS):
        seed = sample_seed(cfg.master_seed, image_index, sample_index, attempt)
        try:
            return synthesize_from_seed(cfg, image_index, seed, sample_index)
        except (DegenerateMaskError, DegenerateKernelError) as exc:
            reasons.append(str(exc))
    raise SkipSampleError(
        f"sample {sample_id(image_index, sample_index)} skipped after {MAX_ATTEMPTS} attempts: {reasons[-1]}"
    )


def regenerate(cfg: GeneratorConfig, record: dict) -> SamplePair:
    """Rebuild a sample from its manifest record."""
    return synthesize_from_seed(cfg, record["image_index"], record["sample_seed"], record["sample_index"])


def encode_record(pair: SamplePair) -> tuple[bytes, bytes, dict]:
    return encode_image(pair.image, "png"), encode_mask(pair.mask), pair.meta.record()


def _record_text(record: dict) -> str:
    return json.dumps(record)


def _work(args):
    cfg, image_index, sample_index = args
    try:
        return encode_record(generate_sample(cfg, image_index, sample_index))
    except SkipSampleError as exc:
        return (image_index, sample_index, str(exc))


def _run_tasks(cfg: GeneratorConfig, tasks: Iterator[tuple[int, int]]):
    """Yield encoded results in task order, using ``cfg.workers`` processes."""
    jobs = ((cfg, i, s) for i, s in tasks)
    if cfg.workers == 1:
        yield from map(_work, jobs)
        return
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        batch = cfg.workers * 4
        while True:
            chunk = list(itertools.islice(jobs, batch))
            if not chunk:
                break
            yield from pool.map(_work, chunk)


def generate_dataset(cfg: GeneratorConfig) -> Manifest:
    """Write ``images/``, ``masks/`` and ``manifest.jsonl`` under ``cfg.output``.

    An ``INCOMPLETE`` marker exists in the output directory until the run
    finishes, so an aborted run is recognisable.
    """
    cfg.validate()
    if not cfg.output:
        raise ConfigError("output", "an output directory is required")
    n_images = len(source_images(cfg))
    out = Path(cfg.output)
    try:
        ensure_dir(out / "images")
        ensure_dir(out / "masks")
        marker = out / INCOMPLETE_MARKER
        marker.write_text("generation in progress or aborted\n")
        content = dict(cfg.content_dict(), schema_version=SCHEMA_VERSION)
        (out / "config.json").write_text(json.dumps(content, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise ImageWriteError(f"{out}: {exc}") from exc

    tasks = ((i, s) for i in range(n_images) for s in range(cfg.samples_per_image))
    records, skipped = [], []
    manifest_path = out / "manifest.jsonl"
    digest = hashlib.sha256()
    try:
        with open(manifest_path, "w", encoding="utf-8") as fh:
            for result in _run_tasks(cfg, tasks):
                if isinstance(result[0], int):
                    log.warning(result[2])
                    skipped.append(result)
                    continue
                img_png, mask_png, rec = result
                (out / rec["image_path"]).write_bytes(img_png)
                (out / rec["mask_path"]).write_bytes(mask_png)
                line = _record_text(rec) + "\n"
                fh.write(line)
                digest.update(line.encode())
                records.append(rec)
    except OSError as exc:
        raise ImageWriteError(f"{out}: {exc}") from exc
    marker.unlink()
    return Manifest(manifest_path, records, skipped, digest.hexdigest())


def load_manifest(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def stream_samples(cfg: GeneratorConfig, sink, count: Optional[int] = None) -> int:
    """Write length-prefixed sample records to the binary ``sink``.

    Flat index ``n`` maps to ``(n % n_images, n // n_images)``, so each pass
    over the sources is one epoch. ``count=None`` streams until the sink
    closes. Returns the number of records written.
    """
    cfg.validate()
    n_images = len(source_images(cfg))
    flat = itertools.count() if count is None else range(count)
    tasks = ((n % n_images, n // n_images) for n in flat)
    written = 0
    try:
        for result in _run_tasks(cfg, tasks):
            if isinstance(result[0], int):
                log.warning(result[2])
                continue
            sink.write(pack_record(*result))
            sink.flush()
            written += 1
    except (BrokenPipeError, ValueError) as exc:
        if isinstance(exc, ValueError) and not getattr(sink, "closed", False):
            raise
        log.info("sink closed after %d records", written)
    return written


def pack_record(img_png: bytes, mask_png: bytes, record: dict) -> bytes:
    payload = img_png + mask_png + _record_text(record).encode("utf-8")
    return struct.pack("<I", len(payload)) + payload


def _png_end(buf: bytes, start: int) -> int:
    """Offset just past the PNG that begins at ``start``."""
    if buf[start:start + 8] != _PNG_SIGNATURE:
        raise ValueError("stream payload does not hold a PNG where expected")
    pos = start + 8
    while pos + 8 <= len(buf):
        (length,) = struct.unpack(">I", buf[pos:pos + 4])
        ctype = buf[pos + 4:pos + 8]
        pos += 12 + length
        if ctype == b"IEND":
            return pos
    raise ValueError("PNG in stream payload is truncated")


def unpack_record(payload: bytes):
    end1 = _png_end(payload, 0)
    end2 = _png_end(payload, end1)
    image = decode_image(payload[:end1])
    mask = decode_mask(payload[end1:end2])
    record = json.loads(payload[end2:].decode("utf-8"))
    return image, mask, record


def read_stream(stream) -> Iterator[tuple[np.ndarray, np.ndarray, dict]]:
    """Parse records written by :func:`stream_samples` until EOF."""
    while True:
        header = stream.read(4)
        if len(header) < 4:
            return
        (n,) = struct.unpack("<I", header)
        payload = stream.read(n)
        if len(payload) < n:
            raise EOFError("truncated stream record")
        yield unpack_record(payload)


def tree_digest(root) -> str:
    """SHA-256 over relative paths and contents of every file under ``root``."""
    root = Path(root)
    h = hashlib.sha256()
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for name in sorted(filenames):
            p = Path(dirpath) / name
            h.update(str(p.relative_to(root)).encode())
            h.update(b"\0")
            h.update(p.read_bytes())
    return h.hexdigest()
