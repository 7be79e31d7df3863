"""Command-line entry point: ``generate``, ``evaluate``, ``baseline``, ``inspect``.

Exit codes: 0 ok, 2 configuration error, 3 I/O error, 4 nothing evaluable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import DEFAULT_SCALES, sharpness_map
from .blurkernel import BlurSpec, realize_kernel
from .errors import ConfigError, ImageDecodeError, ImageWriteError, ProposalLoadError
from .evaluation import evaluate_dataset, load_type_map, pooled_pixels, tta_average, write_curves
from .imagecore import ensure_dir, list_images, load_image, save_map
from .pipeline import (
    SCHEMA_VERSION,
    GeneratorConfig,
    generate_dataset,
    load_manifest,
    regenerate,
    stream_samples,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_UNDEFINED = 4

log = logging.getLogger("blursynth")

# flag dest -> GeneratorConfig field
_GENERATE_FIELDS = {
    "source": "source",
    "mask_mode": "mask_mode",
    "proposal_dir": "proposal_dir",
    "label_dir": "label_dir",
    "p_inv": "p_inv",
    "motion_ratio": "motion_ratio",
    "elastic_amplitude_ratio": "elastic_amplitude_ratio",
    "elastic_smoothness_ratio": "elastic_smoothness_ratio",
    "inpaint_radius": "inpaint_radius",
    "samples_per_image": "samples_per_image",
    "seed": "master_seed",
    "workers": "workers",
    "out": "output",
}


def _config_from_args(args) -> GeneratorConfig:
    values: dict = {}
    if args.config:
        try:
            values = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("config", f"cannot read {args.config}: {exc}") from exc
        values.pop("schema_version", None)
    for dest, name in _GENERATE_FIELDS.items():
        v = getattr(args, dest)
        if v is not None:
            values[name] = v
    if args.sigma_range is not None:
        values["sigma_min"], values["sigma_max"] = args.sigma_range
    if args.m_range is not None:
        values["m_min"], values["m_max"] = args.m_range
    values.setdefault("workers", os.cpu_count() or 1)
    try:
        return GeneratorConfig.from_dict(values).validate()
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from exc


def cmd_generate(args) -> int:
    cfg = _config_from_args(args)
    if args.stream:
        n = stream_samples(cfg, sys.stdout.buffer, args.count)
        print(f"streamed {n} records; config hash {cfg.content_hash()}", file=sys.stderr)
        return EXIT_OK
    if not cfg.output:
        raise ConfigError("output", "--out is required unless --stream is given")
    manifest = generate_dataset(cfg)
    print(f"manifest {manifest.path}")
    print(f"config hash {cfg.content_hash()}")
    print(f"records {len(manifest.records)} skipped {len(manifest.skipped)}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    for d in (args.pred, args.gt):
        if not Path(d).is_dir():
            print(f"error: {d} is not a directory", file=sys.stderr)
            return EXIT_IO
    type_map = load_type_map(args.type_map) if args.type_map else None
    summary = evaluate_dataset(args.pred, args.gt, type_map, flattened=args.flattened, workers=args.workers)
    if not summary.records:
        print("error: no image could be evaluated "
              f"({len(summary.omissions)} without prediction, {len(summary.skipped)} single-class)",
              file=sys.stderr)
        return EXIT_UNDEFINED
    print(summary.to_text())
    if args.csv:
        summary.write_csv(args.csv)
    if args.curves:
        scores, labels = pooled_pixels(args.pred, args.gt, [r.image_id for r in summary.records])
        write_curves(args.curves, scores, labels)
    return EXIT_OK


def cmd_baseline(args) -> int:
    src = Path(args.images)
    if not src.is_dir():
        print(f"error: {src} is not a directory", file=sys.stderr)
        return EXIT_IO
    out = ensure_dir(args.out)
    images = list_images(src)
    if not images:
        log.warning("no images found in %s", src)
    scales = tuple(args.scales) if args.scales else DEFAULT_SCALES
    predict = lambda im: sharpness_map(im, scales)  # noqa: E731
    for path in images:
        img = load_image(path)
        blur_map = tta_average(predict, img) if args.tta else predict(img)
        save_map(blur_map, out / f"{path.stem}.png")
    print(f"wrote {len(images)} maps to {out}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    manifest = Path(args.manifest)
    records = {r["id"]: r for r in load_manifest(manifest)}
    if args.id not in records:
        print(f"error: id {args.id} not in {manifest}", file=sys.stderr)
        return EXIT_CONFIG
    rec = records[args.id]
    print(json.dumps(rec, indent=2))
    K = realize_kernel(BlurSpec.from_record(rec))
    print(f"kernel {K.shape[0]}x{K.shape[1]} sum {K.sum():.12f} peak {K.max():.6f}")
    if K.shape[0] <= 41:
        shades = " .:-=+*#%@"
        for row in K / K.max():
            print("".join(shades[min(int(v * len(shades)), len(shades) - 1)] for v in row))
    if args.kernel_out:
        save_map(K / K.max(), args.kernel_out, bits=8)
    cfg_path = Path(args.config) if args.config else manifest.parent / "config.json"
    if args.regenerate:
        values = json.loads(cfg_path.read_text())
        values.pop("schema_version", None)
        cfg = GeneratorConfig.from_dict(values)
        pair = regenerate(cfg, rec)
        stored = load_image(manifest.parent / rec["image_path"])
        err = float(np.abs(pair.image - stored).max())
        print(f"regenerated image max abs difference {err:.6f} (quantization step {1 / 255:.6f})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blursynth", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version",
                   version=f"blursynth {__version__} (manifest schema {SCHEMA_VERSION})")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize blurred image / mask pairs")
    g.add_argument("--config", help="JSON config; explicit flags override its values")
    g.add_argument("--source", help="directory of sharp source images")
    g.add_argument("--mask-mode", choices=("proposals", "labels"))
    g.add_argument("--proposal-dir", help="per-image proposal directories (<dir>/<stem>/)")
    g.add_argument("--label-dir", help="label map PNGs named <stem>.png")
    g.add_argument("--p-inv", type=float, help="mask inversion probability")
    g.add_argument("--motion-ratio", type=float, help="probability of motion rather than defocus blur")
    g.add_argument("--sigma-range", type=float, nargs=2, metavar=("LO", "HI"))
    g.add_argument("--m-range", type=int, nargs=2, metavar=("LO", "HI"), help="motion length range")
    g.add_argument("--elastic-amplitude-ratio", type=float, help="max warp amplitude as a fraction of m")
    g.add_argument("--elastic-smoothness-ratio", type=float, help="warp smoothness as a fraction of m")
    g.add_argument("--inpaint-radius", type=float)
    g.add_argument("--samples-per-image", type=int)
    g.add_argument("--seed", type=int, help="master seed")
    g.add_argument("--workers", type=int, help="worker processes (default: logical cores)")
    g.add_argument("--out", help="output directory")
    g.add_argument("--stream", action="store_true", help="write length-prefixed records to stdout")
    g.add_argument("--count", type=int, help="number of records to stream (default: unbounded)")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("evaluate", help="score blur maps against ground-truth masks")
    e.add_argument("--pred", required=True, help="prediction PNGs named <id>.png")
    e.add_argument("--gt", required=True, help="ground-truth mask PNGs named <id>.png")
    e.add_argument("--type-map", help="JSON or CSV mapping id -> defocus|motion|unknown")
    e.add_argument("--flattened", action="store_true", help="also report pooled-pixel AP/AUC")
    e.add_argument("--csv", help="write per-image records here")
    e.add_argument("--curves", help="directory for pooled ROC and P-R curve CSVs")
    e.add_argument("--workers", type=int, default=1)
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("baseline", help="write gradient-energy blur maps")
    b.add_argument("--images", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--tta", action="store_true", help="average with the mirrored prediction")
    b.add_argument("--scales", type=float, nargs="+", help=f"smoothing scales (default {DEFAULT_SCALES})")
    b.set_defaults(func=cmd_baseline)

    i = sub.add_parser("inspect", help="show a manifest record and re-realize its kernel")
    i.add_argument("--manifest", required=True)
    i.add_argument("--id", required=True)
    i.add_argument("--kernel-out", help="write the kernel as an 8-bit PNG (peak = 255)")
    i.add_argument("--regenerate", action="store_true", help="re-run the sample and compare to the stored image")
    i.add_argument("--config", help="config JSON (default: config.json next to the manifest)")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ImageDecodeError, ImageWriteError, ProposalLoadError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
