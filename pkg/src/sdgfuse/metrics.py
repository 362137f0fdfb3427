"""Depth-completion and stereo error metrics."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass

import numpy as np

from .grid import DepthMap

log = logging.getLogger(__name__)

DEFAULT_BUCKETS = ((0.0, 20.0), (20.0, 100.0))


@dataclass(frozen=True)
class MetricReport:
    rmse_mm: float
    mae_mm: float
    irmse: float  # 1/km
    imae: float  # 1/km
    valid_count: int
    bucket: tuple[float, float] | None = None
    epe_px: float | None = None
    d1_pct: float | None = None
    invalid_pred_count: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def parse_buckets(text: str) -> list[tuple[float, float]]:
    """``"0-20,20-100"`` to ``[(0, 20), (20, 100)]``."""
    out = []
    for part in text.split(","):
        lo, sep, hi = part.strip().partition("-")
        if not sep:
            raise ValueError(f"bucket {part!r} is not of the form LO-HI")
        lo_f, hi_f = float(lo), float(hi)
        if not (0 <= lo_f < hi_f):
            raise ValueError(f"bucket {part!r} must satisfy 0 <= LO < HI")
        out.append((lo_f, hi_f))
    return out


def _report(pred: np.ndarray, gt: np.ndarray, bucket, n_invalid: int) -> MetricReport:
    err = pred - gt
    ierr = 1000.0 / pred - 1000.0 / gt  # 1/km
    return MetricReport(
        rmse_mm=float(np.sqrt(np.mean(err * err))) * 1000.0,
        mae_mm=float(np.mean(np.abs(err))) * 1000.0,
        irmse=float(np.sqrt(np.mean(ierr * ierr))),
        imae=float(np.mean(np.abs(ierr))),
        valid_count=int(pred.size),
        bucket=bucket,
        invalid_pred_count=n_invalid,
    )


def depth_metrics(pred: DepthMap, gt: DepthMap, buckets=None,
                  penalty_depth: float | None = None) -> list[MetricReport]:
    """RMSE/MAE (mm) and iRMSE/iMAE (1/km) over ground-truth-valid pixels.

    ``buckets`` is a list of ``[lo, hi)`` ground-truth depth intervals in
    meters; ``None`` reports the whole image once.  Where the prediction is
    invalid but the ground truth is not, ``penalty_depth`` stands in for the
    prediction; with ``penalty_depth=None`` such pixels are skipped and only
    counted.  Buckets with no pixels are omitted with a log notice.
    """
    if pred.shape != gt.shape:
        raise ValueError(f"prediction {pred.shape} and ground truth {gt.shape} differ in size")
    if penalty_depth is not None and not penalty_depth > 0:
        raise ValueError("penalty_depth must be positive")
    p = pred.depth
    if penalty_depth is not None:
        p = np.where(pred.valid_mask, p, penalty_depth)
        usable = gt.valid_mask
    else:
        usable = gt.valid_mask & pred.valid_mask
    missing = gt.valid_mask & ~pred.valid_mask
    reports = []
    for bucket in (buckets if buckets is not None else [None]):
        sel = usable
        miss = missing
        if bucket is not None:
            lo, hi = bucket
            inside = (gt.depth >= lo) & (gt.depth < hi)
            sel = sel & inside
            miss = miss & inside
        if not np.any(sel):
            log.info("bucket %s has no valid pixels; omitted", bucket)
            continue
        reports.append(_report(p[sel], gt.depth[sel], None if bucket is None else tuple(bucket),
                               int(np.count_nonzero(miss))))
    return reports


def disparity_metrics(pred: np.ndarray, gt: np.ndarray, valid_mask: np.ndarray | None = None
                      ) -> tuple[float, float]:
    """End-point error (px) and D1 (%): outliers exceed both 3 px and 5% of ground truth."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"prediction {pred.shape} and ground truth {gt.shape} differ in size")
    valid = np.isfinite(gt) & (gt > 0) if valid_mask is None else np.asarray(valid_mask, dtype=bool)
    valid = valid & np.isfinite(pred)
    if not np.any(valid):
        raise ValueError("no valid pixels to evaluate")
    err = np.abs(pred[valid] - gt[valid])
    outlier = (err > 3.0) & (err > 0.05 * np.abs(gt[valid]))
    return float(np.mean(err)), float(np.mean(outlier) * 100.0)


def combine_rmse(reports: list[MetricReport]) -> float:
    """Valid-count-weighted quadratic mean of bucket RMSEs (mm)."""
    n = np.array([r.valid_count for r in reports], dtype=np.float64)
    r = np.array([r.rmse_mm for r in reports])
    return float(np.sqrt(np.sum(n * r * r) / np.sum(n)))


def format_reports(reports: list[MetricReport], fmt: str = "table") -> str:
    keys = ["bucket", "rmse_mm", "mae_mm", "irmse", "imae", "epe_px", "d1_pct", "valid_count",
            "invalid_pred_count"]

    def cell(v):
        if v is None:
            return "-"
        if isinstance(v, tuple):
            return f"{v[0]:g}-{v[1]:g}"
        if isinstance(v, float):
            return f"{v:.4f}"
        return str(v)

    if fmt == "json-lines":
        return "\n".join(json.dumps({k: (list(d[k]) if isinstance(d[k], tuple) else d[k]) for k in keys})
                         for d in (r.as_dict() for r in reports))
    rows = [[cell(r.as_dict()[k]) for k in keys] for r in reports]
    if fmt == "csv":
        return "\n".join([",".join(keys)] + [",".join(row) for row in rows])
    if fmt != "table":
        raise ValueError(f"unknown format {fmt!r}")
    widths = [max(len(k), *(len(row[i]) for row in rows)) if rows else len(k) for i, k in enumerate(keys)]
    lines = ["  ".join(k.rjust(w) for k, w in zip(keys, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in rows]
    return "\n".join(lines)
