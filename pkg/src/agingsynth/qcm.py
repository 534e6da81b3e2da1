"""Quality control over the generated time series: score every frame
against the fixed image, locate each metric's best stopping point on
the integration grid, and combine the per-metric optima.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

from . import metrics as M
from .errors import DataError, NumericError
from .svf import TimeGrid
from .volume import LabelVolume, Volume


@dataclass(frozen=True)
class MetricCurve:
    """One metric evaluated at every grid time, plus its argbest."""

    metric: str
    times: tuple[float, ...]
    values: tuple[float, ...]
    best_t: float

    @property
    def best_value(self) -> float:
        return self.values[self.times.index(self.best_t)]


@dataclass(frozen=True)
class StoppingPointReport:
    """Per-metric best stopping points and their arithmetic mean."""

    best_t: dict[str, float]
    mean_s: float


def _argbest(values, lower_is_better: bool) -> int:
    """Index of the best value; ties break toward the smaller time."""
    best = 0
    for i in range(1, len(values)):
        if lower_is_better:
            if values[i] < values[best]:
                best = i
        else:
            if values[i] > values[best]:
                best = i
    return best


def score_curve(
    frames: list[Volume],
    fixed: Volume,
    grid: TimeGrid,
    metric: str,
    labels: tuple[list[LabelVolume], LabelVolume] | None = None,
) -> MetricCurve:
    """Evaluate one metric between every frame and the fixed image.

    For DSC, ``labels`` must supply the per-frame label volumes and the
    fixed labels; for intensity metrics it must be omitted. An unbounded
    PSNR (identical images) ranks as +inf.
    """
    if len(frames) != grid.N:
        raise DataError(f"expected {grid.N} frames, got {len(frames)}")
    if metric not in M.ALL_METRICS:
        raise DataError(f"unknown metric {metric!r}")
    if metric == M.DSC:
        if labels is None:
            raise DataError("dsc scoring requires frame and fixed label volumes")
        frame_labels, fixed_labels = labels
        if len(frame_labels) != grid.N:
            raise DataError(f"expected {grid.N} frame label volumes, got {len(frame_labels)}")
    elif labels is not None:
        raise DataError(f"labels were supplied but metric {metric!r} does not use them")

    values = []
    for i in range(grid.N):
        if metric == M.DSC:
            values.append(M.dsc(frame_labels[i], fixed_labels).value)
        else:
            try:
                values.append(M.compute(metric, frames[i], fixed).value)
            except NumericError as e:
                if metric == M.PSNR and "unbounded" in str(e):
                    values.append(math.inf)
                else:
                    raise
    best = _argbest(values, M.LOWER_IS_BETTER[metric])
    return MetricCurve(metric, tuple(grid.times), tuple(values), grid.times[best])


def adjust_stopping_point(curves: list[MetricCurve]) -> StoppingPointReport:
    """Combine per-metric optima into the adjusted stopping point
    (arithmetic mean of the per-metric best times)."""
    if not curves:
        raise DataError("at least one metric curve is required")
    best = {}
    for c in curves:
        if c.metric in best:
            raise DataError(f"duplicate curve for metric {c.metric!r}")
        best[c.metric] = c.best_t
    mean_s = float(sum(best.values()) / len(best))
    return StoppingPointReport(best_t=best, mean_s=mean_s)


def write_curves_csv(curves: list[MetricCurve], path) -> None:
    """Emit curves as CSV with columns t, metric, value."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t", "metric", "value"])
        for c in curves:
            for t, v in zip(c.times, c.values):
                w.writerow([f"{t:.10g}", c.metric, f"{v:.10g}"])


def read_curves_csv(path) -> list[MetricCurve]:
    p = Path(path)
    if not p.exists():
        raise DataError(f"file not found: {p}")
    rows: dict[str, list[tuple[float, float]]] = {}
    with open(p, newline="") as f:
        reader = csv.DictReader(f)
        for row in reader:
            try:
                rows.setdefault(row["metric"], []).append(
                    (float(row["t"]), float(row["value"]))
                )
            except (KeyError, TypeError, ValueError) as e:
                raise DataError(f"{p}: malformed curve row {row!r}: {e}") from e
    curves = []
    for metric, pts in rows.items():
        pts.sort()
        times = tuple(t for t, _ in pts)
        values = tuple(v for _, v in pts)
        best = _argbest(values, M.LOWER_IS_BETTER[metric])
        curves.append(MetricCurve(metric, times, values, times[best]))
    return curves
