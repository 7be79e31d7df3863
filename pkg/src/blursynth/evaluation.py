"""Scoring predicted blur maps against binary ground-truth masks.

The default protocol computes ROC AUC and average precision per image and
averages them. The flattened protocol instead pools the pixels of every image
into one vector before computing a single value. Prediction values are used
as-is; no per-image rescaling is applied.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.stats import rankdata

from .errors import UndefinedMetricError
from .imagecore import list_images, load_image, load_mask, resize_bilinear, to_luma

BLUR_TYPES = ("defocus", "motion", "unknown")


def _check_inputs(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(bool)
    if s.size != y.size:
        raise ValueError(f"{s.size} scores but {y.size} labels")
    if s.size == 0:
        raise ValueError("empty input")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == y.size:
        raise UndefinedMetricError("labels contain a single class")
    return s, y


def roc_auc(scores, labels) -> float:
    """Rank-based ROC AUC; tied positive/negative pairs count one half."""
    s, y = _check_inputs(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    ranks = rankdata(s)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _threshold_groups(s, y):
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    tp = np.cumsum(y[order])
    ends = np.r_[np.flatnonzero(np.diff(s_sorted)), s.size - 1]
    return s_sorted[ends], tp[ends], ends + 1


def average_precision(scores, labels) -> float:
    """Non-interpolated AP: sum of ``(R_n - R_{n-1}) * P_n`` over descending thresholds.

    Equal scores form one threshold.
    """
    s, y = _check_inputs(scores, labels)
    _, tp, n_pred = _threshold_groups(s, y)
    precision = tp / n_pred
    recall = tp / y.sum()
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def roc_curve(scores, labels):
    """``(thresholds, fpr, tpr)`` with the ``(0, 0)`` origin prepended."""
    s, y = _check_inputs(scores, labels)
    thr, tp, n_pred = _threshold_groups(s, y)
    fp = n_pred - tp
    return (np.r_[np.inf, thr], np.r_[0.0, fp / (~y).sum()], np.r_[0.0, tp / y.sum()])


def pr_curve(scores, labels):
    """``(thresholds, precision, recall)`` per descending threshold."""
    s, y = _check_inputs(scores, labels)
    thr, tp, n_pred = _threshold_groups(s, y)
    return thr, tp / n_pred, tp / y.sum()


def write_curves(directory, scores, labels) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    thr, fpr, tpr = roc_curve(scores, labels)
    with open(directory / "roc.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "fpr", "tpr"])
        w.writerows(zip(thr.tolist(), fpr.tolist(), tpr.tolist()))
    thr, prec, rec = pr_curve(scores, labels)
    with open(directory / "pr.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "precision", "recall"])
        w.writerows(zip(thr.tolist(), prec.tolist(), rec.tolist()))


@dataclass
class EvalRecord:
    image_id: str
    blur_type: str
    auc: float
    ap: float


@dataclass
class TypeSummary:
    count: int
    auc: float
    ap: float


@dataclass
class EvalSummary:
    records: list[EvalRecord]
    by_type: dict[str, TypeSummary]
    overall: TypeSummary
    flattened_ap: Optional[float] = None
    flattened_auc: Optional[float] = None
    skipped: list[str] = field(default_factory=list)
    omissions: list[str] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [f"{'':10s} {'AUC':>7s} {'AP':>7s} {'n':>6s}"]
        rows = [(t, self.by_type[t]) for t in BLUR_TYPES if t in self.by_type]
        if len(rows) != 1:
            rows.append(("all", self.overall))
        for name, ts in rows:
            lines.append(f"{name.capitalize():10s} {ts.auc:7.4f} {ts.ap:7.4f} {ts.count:6d}")
        if self.flattened_ap is not None:
            lines.append(f"flattened AP {self.flattened_ap:.4f}  AUC {self.flattened_auc:.4f}")
        if self.skipped:
            lines.append(f"skipped (single-class ground truth): {len(self.skipped)}")
        if self.omissions:
            lines.append(f"missing predictions: {len(self.omissions)} ({', '.join(self.omissions[:5])}"
                         f"{', ...' if len(self.omissions) > 5 else ''})")
        return "\n".join(lines)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["image_id", "blur_type", "auc", "ap"])
            for r in self.records:
                w.writerow([r.image_id, r.blur_type, repr(r.auc), repr(r.ap)])


def _as_map(pred) -> np.ndarray:
    p = np.asarray(pred, dtype=np.float64)
    if p.ndim == 3:
        if p.shape[2] != 1:
            raise ValueError("prediction must be single-channel")
        p = p[:, :, 0]
    if p.ndim != 2:
        raise ValueError(f"prediction must be (H, W), got {p.shape}")
    return p


def match_size(pred, shape) -> np.ndarray:
    """Bilinearly resize a prediction map to ``shape`` if it differs."""
    p = _as_map(pred)
    if p.shape != tuple(shape):
        p = resize_bilinear(p, tuple(shape))
    return p


def evaluate_image(pred, gt, image_id: str = "", blur_type: str = "unknown") -> EvalRecord:
    gt = np.asarray(gt, dtype=bool)
    p = match_size(pred, gt.shape)
    return EvalRecord(image_id, blur_type, roc_auc(p, gt), average_precision(p, gt))


def tta_average(pred_fn: Callable[[np.ndarray], np.ndarray], img) -> np.ndarray:
    """Mean of ``pred_fn(img)`` and the un-flipped prediction on the mirrored image."""
    img = np.asarray(img)
    direct = np.asarray(pred_fn(img), dtype=np.float64)
    mirrored = np.asarray(pred_fn(img[:, ::-1]), dtype=np.float64)[:, ::-1]
    return 0.5 * (direct + mirrored)


def load_prediction(path) -> np.ndarray:
    """8- or 16-bit PNG normalized by its code maximum; color input is reduced to luma."""
    return to_luma(load_image(path))


def load_type_map(path) -> dict[str, str]:
    """Read ``id -> blur type`` from JSON or from ``id,type`` CSV lines."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        raw = json.loads(path.read_text())
    else:
        raw = {}
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].startswith("#") or row[0] in ("id", "image_id"):
                    continue
                raw[row[0].strip()] = row[1].strip()
    out = {}
    for key, value in raw.items():
        value = str(value).lower()
        if value not in BLUR_TYPES:
            raise ValueError(f"{path}: unknown blur type {value!r} for {key}")
        out[Path(key).stem] = value
    return out


def _load_pair(args):
    image_id, pred_path, gt_path = args
    gt = load_mask(gt_path)
    return image_id, match_size(load_prediction(pred_path), gt.shape), gt


def _mean(values) -> float:
    return float(np.mean(values)) if values else float("nan")


def summarize(records: list[EvalRecord]) -> tuple[dict[str, TypeSummary], TypeSummary]:
    by_type = {}
    for t in BLUR_TYPES:
        sel = [r for r in records if r.blur_type == t]
        if sel:
            by_type[t] = TypeSummary(len(sel), _mean([r.auc for r in sel]), _mean([r.ap for r in sel]))
    overall = TypeSummary(len(records), _mean([r.auc for r in records]), _mean([r.ap for r in records]))
    return by_type, overall


def evaluate_dataset(pred_dir, gt_dir, type_map: Optional[dict] = None,
                     flattened: bool = False, workers: int = 1) -> EvalSummary:
    """Per-image protocol over every ground-truth mask in ``gt_dir``.

    Predictions are matched by file stem. Ground truths without a prediction
    are listed in ``omissions``; single-class ground truths are listed in
    ``skipped``. With ``flattened=True`` the pooled-pixel AP/AUC are added.
    """
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    type_map = type_map or {}
    preds = {p.stem: p for p in list_images(pred_dir)}
    jobs, omissions = [], []
    for gt_path in list_images(gt_dir):
        if gt_path.stem in preds:
            jobs.append((gt_path.stem, preds[gt_path.stem], gt_path))
        else:
            omissions.append(gt_path.stem)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(_load_pair, jobs, chunksize=8))
    else:
        pairs = [_load_pair(j) for j in jobs]

    records, skipped = [], []
    for image_id, p, gt in pairs:
        try:
            records.append(evaluate_image(p, gt, image_id, type_map.get(image_id, "unknown")))
        except UndefinedMetricError:
            skipped.append(image_id)
    by_type, overall = summarize(records)
    summary = EvalSummary(records, by_type, overall, skipped=skipped, omissions=omissions)
    if flattened and pairs:
        all_p = np.concatenate([p.ravel() for _, p, _ in pairs])
        all_y = np.concatenate([g.ravel() for _, _, g in pairs])
        summary.flattened_ap = average_precision(all_p, all_y)
        summary.flattened_auc = roc_auc(all_p, all_y)
    return summary


def flattened_scores(preds, gts) -> tuple[float, float]:
    """Pooled-pixel ``(auc, ap)`` for in-memory prediction/mask lists."""
    all_p = np.concatenate([match_size(p, g.shape).ravel() for p, g in zip(preds, gts)])
    all_y = np.concatenate([np.asarray(g, dtype=bool).ravel() for g in gts])
    return roc_auc(all_p, all_y), average_precision(all_p, all_y)


def pooled_pixels(pred_dir, gt_dir, ids) -> tuple[np.ndarray, np.ndarray]:
    """Concatenated prediction values and labels of the given ids."""
    pairs = [_load_pair((i, Path(pred_dir) / f"{i}.png", Path(gt_dir) / f"{i}.png")) for i in ids]
    return (np.concatenate([p.ravel() for _, p, _ in pairs]),
            np.concatenate([g.ravel() for _, _, g in pairs]))
