"""Pixel-level segmentation evaluation: Dice overlap, ROC curve and AUC.

The ROC curve is pooled over every pixel of a test set (one global curve);
classification at a threshold uses the inclusive >= rule, matching the mask
binarization used everywhere else in the package.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


class RocPoint(NamedTuple):
    fpr: float
    tpr: float
    threshold: float


def _as_mask(name: str, m) -> np.ndarray:
    a = np.asarray(m)
    vals = np.unique(a)
    if not np.all(np.isin(vals, (0, 1))):
        raise ValueError(f"{name} must contain only 0/1 values")
    return a.astype(bool)


def dice(pred, truth) -> float:
    """Area-overlap score 2|A∩B| / (|A|+|B|); 1.0 when both masks are empty."""
    p = _as_mask("pred", pred)
    t = _as_mask("truth", truth)
    if p.shape != t.shape:
        raise ValueError(f"dice: shape mismatch {p.shape} vs {t.shape}")
    denom = int(p.sum()) + int(t.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int(np.logical_and(p, t).sum()) / denom


def confusion(pred, truth) -> tuple[int, int, int, int]:
    """Pixel confusion counts (tp, fp, tn, fn) between two binary masks."""
    p = _as_mask("pred", pred)
    t = _as_mask("truth", truth)
    if p.shape != t.shape:
        raise ValueError(f"confusion: shape mismatch {p.shape} vs {t.shape}")
    tp = int(np.sum(p & t))
    fp = int(np.sum(p & ~t))
    tn = int(np.sum(~p & ~t))
    fn = int(np.sum(~p & t))
    return tp, fp, tn, fn


def _roc_arrays(scores: np.ndarray, labels: np.ndarray):
    """Staircase (thresholds, fpr, tpr) swept over distinct scores, descending.

    The leading sentinel (threshold +inf) contributes the (0,0) point; the
    lowest distinct score classifies everything positive, closing at (1,1).
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.size != y.size:
        raise ValueError(f"scores ({s.size}) and labels ({y.size}) differ in length")
    if not np.all(np.isin(np.unique(y), (0, 1))):
        raise ValueError("labels must contain only 0/1 values")
    y = y.astype(np.int64)
    npos = int(y.sum())
    nneg = y.size - npos
    if npos == 0 or nneg == 0:
        raise ValueError("ROC requires both classes present; got a single class")

    order = np.argsort(-s, kind="stable")
    s = s[order]
    y = y[order]
    tps = np.cumsum(y)
    fps = np.cumsum(1 - y)
    last = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    thr = np.r_[np.inf, s[last]]
    tpr = np.r_[0.0, tps[last] / npos]
    fpr = np.r_[0.0, fps[last] / nneg]
    return thr, fpr, tpr


def roc_curve(scores, labels) -> list[RocPoint]:
    """ROC points for pooled pixel scores against 0/1 labels."""
    thr, fpr, tpr = _roc_arrays(np.asarray(scores), np.asarray(labels))
    return [RocPoint(float(f), float(t), float(th)) for f, t, th in zip(fpr, tpr, thr)]


def auc(points) -> float:
    """Trapezoidal area under a ROC point list (TPR over FPR)."""
    if len(points) < 2:
        raise ValueError("auc needs at least two ROC points")
    fpr = np.array([p[0] for p in points])
    tpr = np.array([p[1] for p in points])
    return float(np.trapezoid(tpr, fpr))


def _auc_arrays(fpr: np.ndarray, tpr: np.ndarray) -> float:
    return float(np.trapezoid(tpr, fpr))


@dataclass
class EvalReport:
    """Per-image Dice, pooled ROC/AUC, and confusion counts at threshold 0.5."""
    image_ids: list[str]
    dice_scores: list[float]
    mean_dice: float
    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def roc_points(self) -> list[RocPoint]:
        return [RocPoint(float(f), float(t), float(th))
                for f, t, th in zip(self.fpr, self.tpr, self.thresholds)]

    def write_csvs(self, out_dir: str):
        """Write dice.csv, roc.csv and summary.csv under out_dir."""
        from vpiseg.pgm import atomic_write_bytes
        os.makedirs(out_dir, exist_ok=True)
        lines = ["image_id,dice"]
        lines += [f"{i},{d!r}" for i, d in zip(self.image_ids, self.dice_scores)]
        atomic_write_bytes(os.path.join(out_dir, "dice.csv"),
                           ("\n".join(lines) + "\n").encode())
        lines = ["threshold,fpr,tpr"]
        lines += [f"{float(th)!r},{float(f)!r},{float(t)!r}"
                  for th, f, t in zip(self.thresholds, self.fpr, self.tpr)]
        atomic_write_bytes(os.path.join(out_dir, "roc.csv"),
                           ("\n".join(lines) + "\n").encode())
        summary = f"mean_dice,auc\n{self.mean_dice!r},{self.auc!r}\n"
        atomic_write_bytes(os.path.join(out_dir, "summary.csv"), summary.encode())


def build_report(image_ids, dice_scores, pooled_scores, pooled_labels,
                 counts) -> EvalReport:
    thr, fpr, tpr = _roc_arrays(pooled_scores, pooled_labels)
    tp, fp, tn, fn = counts
    return EvalReport(
        image_ids=list(image_ids),
        dice_scores=[float(d) for d in dice_scores],
        mean_dice=float(np.mean(dice_scores)),
        thresholds=thr, fpr=fpr, tpr=tpr,
        auc=_auc_arrays(fpr, tpr),
        tp=tp, fp=fp, tn=tn, fn=fn)
