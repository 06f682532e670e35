"""Flow accuracy metrics and the flow warp loss."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDenominatorError, InvalidInputError
from .events import EventSet, FlowField, IweConfig, SensorGeometry, build_iue, build_iwe, warp_events
from .objectives import variance_contrast


@dataclass
class FlowEval:
    aee: float
    outlier_pct: float
    n_valid: int


def _endpoint_errors(pred, gt, mask):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape or pred.ndim != 3 or pred.shape[2] != 2:
        raise InvalidInputError(f"flow shapes differ or are not (H, W, 2): {pred.shape} vs {gt.shape}")
    if mask is None:
        mask = np.ones(pred.shape[:2], dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != pred.shape[:2]:
        raise InvalidInputError("mask shape does not match the flow")
    if not mask.any():
        raise InvalidInputError("evaluation mask is empty")
    d = pred[mask] - gt[mask]
    return np.hypot(d[:, 0], d[:, 1])


def aee(pred, gt, mask=None) -> float:
    """Mean endpoint error (px) over masked pixels."""
    return float(np.mean(_endpoint_errors(pred, gt, mask)))


def outlier_pct(pred, gt, mask=None, threshold: float = 3.0) -> float:
    """Percentage of masked pixels whose endpoint error exceeds ``threshold``."""
    err = _endpoint_errors(pred, gt, mask)
    return float(100.0 * np.count_nonzero(err > threshold) / err.size)


def evaluate(pred, gt, mask=None, threshold: float = 3.0) -> FlowEval:
    err = _endpoint_errors(pred, gt, mask)
    return FlowEval(float(err.mean()), float(100.0 * np.count_nonzero(err > threshold) / err.size),
                    int(err.size))


def fwl(events: EventSet, flow: FlowField, geometry: SensorGeometry,
        iwe_cfg: IweConfig = IweConfig(), t_ref: float | None = None) -> float:
    """Variance of the warped-event image over that of the unwarped one."""
    if t_ref is None:
        t_ref = events.t0
    base = variance_contrast(build_iue(events, geometry, iwe_cfg))
    if base == 0:
        raise DegenerateDenominatorError("unwarped event image has zero variance")
    warped = build_iwe(warp_events(events, flow, t_ref, geometry), geometry, iwe_cfg, t_ref)
    return variance_contrast(warped) / base


def velocity_to_displacement(flow: FlowField, dt: float) -> np.ndarray:
    return np.stack([flow.vx * dt, flow.vy * dt], axis=-1)


REPORT_FIELDS = ("sample_id", "aee", "outlier_pct", "fwl", "n_valid")


def write_report(path, rows) -> None:
    """Write ``(sample_id, aee, outlier_pct, fwl, n_valid)`` rows as CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_FIELDS)
        for r in rows:
            w.writerow([r[0]] + ["" if v is None else (f"{v:.6f}" if isinstance(v, float) else v)
                                 for v in r[1:]])
