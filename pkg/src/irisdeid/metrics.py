"""Utility-side evaluation: per-class IoU, pupil-center error statistics,
and outlier-trimmed MSE."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyAfterTrim, LengthMismatch
from .image import SegMask

__all__ = [
    "IoUReport",
    "CenterErrorReport",
    "iou",
    "center_errors",
    "outlier_trimmed_mse",
]


@dataclass(frozen=True)
class IoUReport:
    per_class: dict
    miou: float


@dataclass(frozen=True)
class CenterErrorReport:
    mse_x: float
    mse_y: float
    r2_x: float
    r2_y: float
    n: int


def iou(pred: SegMask, gt: SegMask) -> IoUReport:
    """Per-class intersection over union.

    Classes absent from both masks are omitted so the mean never touches
    a 0/0 term; a class present in either mask always has union > 0.
    """
    if pred.shape != gt.shape:
        raise DimensionMismatch(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    classes = sorted(set(np.unique(pred)) | set(np.unique(gt)))
    per_class = {}
    for c in classes:
        p = pred == c
        g = gt == c
        inter = int((p & g).sum())
        union = int((p | g).sum())
        per_class[int(c)] = inter / union
    return IoUReport(per_class, float(np.mean(list(per_class.values()))))


def _r2(pred: np.ndarray, gt: np.ndarray) -> float:
    ss_res = float(((pred - gt) ** 2).sum())
    ss_tot = float(((gt - gt.mean()) ** 2).sum())
    if ss_tot == 0.0:
        # constant ground truth: perfect fit or undefined
        return 1.0 if ss_res == 0.0 else float("nan")
    return 1.0 - ss_res / ss_tot


def center_errors(pred_centers, gt_centers) -> CenterErrorReport:
    """Per-axis MSE and coefficient of determination of predicted centers
    against ground-truth centers."""
    pred = np.asarray(pred_centers, dtype=np.float64)
    gt = np.asarray(gt_centers, dtype=np.float64)
    if pred.shape != gt.shape:
        raise LengthMismatch(f"center lists differ: {pred.shape} vs {gt.shape}")
    if pred.ndim != 2 or pred.shape[1] != 2:
        raise ValueError("centers must be (N, 2) arrays of (x, y)")
    if pred.shape[0] < 2:
        raise ValueError("need at least 2 center pairs")
    errs = pred - gt
    return CenterErrorReport(
        mse_x=float((errs[:, 0] ** 2).mean()),
        mse_y=float((errs[:, 1] ** 2).mean()),
        r2_x=_r2(pred[:, 0], gt[:, 0]),
        r2_y=_r2(pred[:, 1], gt[:, 1]),
        n=pred.shape[0],
    )


def outlier_trimmed_mse(errors, trim_fraction: float) -> float:
    """Mean square of the errors after dropping the ceil(trim*n) largest
    absolute values.  The sort is stable, so ties drop the later entries."""
    if not 0.0 <= trim_fraction < 0.5:
        raise ValueError("trim_fraction must lie in [0, 0.5)")
    errs = np.asarray(errors, dtype=np.float64).ravel()
    n = errs.size
    # epsilon guards ceil against float fuzz in trim*n (e.g. 0.05 * 20)
    drop = math.ceil(trim_fraction * n - 1e-9) if n else 0
    keep = n - drop
    if keep <= 0:
        raise EmptyAfterTrim(f"trimming {drop} of {n} errors leaves nothing")
    order = np.argsort(np.abs(errs), kind="stable")
    kept = errs[order[:keep]]
    return float((kept**2).mean())
