"""Validation harness for generated sequences against held-out
ground-truth acquisitions: closest-frame matching per metric, age RMSE,
linear regression of estimated on true age, and matched-frame quality
tables grouped by dataset tag.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as asio
from . import metrics as M
from .errors import DataError, NumericError
from .pipeline import AgedFrame, load_frames, load_manifest
from .volume import LabelVolume, Volume


@dataclass(frozen=True, eq=False)
class GroundTruthItem:
    """A held-out real acquisition with its true age."""

    image: Volume
    true_age: float
    labels: LabelVolume | None = None
    tag: str = "default"


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    r_squared: float
    residual_rmse: float


@dataclass(frozen=True)
class EvaluationReport:
    age_rmse: dict[str, float]
    regressions: dict[str, RegressionFit]
    quality: dict[str, dict[str, float]]  # tag -> metric -> mean matched value
    matches: dict[str, list[dict]] = field(default_factory=dict)


def _metric_value(metric: str, frame: AgedFrame, gt: GroundTruthItem) -> float:
    if metric == M.DSC:
        if frame.labels is None or gt.labels is None:
            raise DataError("dsc matching requires labels on both the frame and the ground truth")
        return M.dsc(frame.labels, gt.labels).value
    try:
        return M.compute(metric, frame.image, gt.image).value
    except NumericError as e:
        if metric == M.PSNR and "unbounded" in str(e):
            return math.inf
        raise


def match_closest(
    frames: list[AgedFrame], gt: GroundTruthItem, metric: str
) -> tuple[AgedFrame, M.MetricValue]:
    """The frame most similar to the ground-truth image under one metric;
    ties break toward the smaller integration time."""
    if not frames:
        raise DataError("no frames to match against")
    if metric not in M.ALL_METRICS:
        raise DataError(f"unknown metric {metric!r}")
    lower = M.LOWER_IS_BETTER[metric]
    ordered = sorted(frames, key=lambda f: f.t)
    best_frame = ordered[0]
    best_value = _metric_value(metric, best_frame, gt)
    for frame in ordered[1:]:
        value = _metric_value(metric, frame, gt)
        if (value < best_value) if lower else (value > best_value):
            best_frame, best_value = frame, value
    return best_frame, M.MetricValue(metric, best_value)


def age_rmse(matches: list[tuple[float, float]]) -> float:
    """Root mean square error over (true_age, estimated_age) pairs."""
    if not matches:
        raise DataError("age_rmse requires at least one match")
    sq = [(t - e) ** 2 for t, e in matches]
    return math.sqrt(sum(sq) / len(sq))


def fit_regression(matches: list[tuple[float, float]]) -> RegressionFit:
    """Ordinary least squares of estimated age on true age.

    Also reports the residual RMSE after the regression correction,
    which can only improve on the raw linear-model RMSE.
    """
    if len(matches) < 3:
        raise DataError("regression requires at least 3 matches")
    true = np.array([t for t, _ in matches], dtype=np.float64)
    est = np.array([e for _, e in matches], dtype=np.float64)
    if np.unique(true).size < 2:
        raise DataError("regression requires at least 2 distinct true ages")
    slope, intercept = np.polyfit(true, est, 1)
    resid = est - (slope * true + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((est - est.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res == 0.0 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return RegressionFit(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r2,
        residual_rmse=math.sqrt(ss_res / len(matches)),
    )


def quality_table(
    matched: dict[str, list[tuple[str, M.MetricValue]]]
) -> dict[str, dict[str, float]]:
    """Mean matched-frame value of each metric, grouped by dataset tag.

    ``matched`` maps metric -> list of (tag, value); the result maps
    tag -> metric -> mean (an "all" group aggregates every tag).
    Unbounded PSNR matches propagate as +inf, flagging the group.
    """
    table: dict[str, dict[str, list[float]]] = {}
    for metric, entries in matched.items():
        if not entries:
            continue
        for tag, mv in entries:
            table.setdefault(tag, {}).setdefault(metric, []).append(mv.value)
            table.setdefault("all", {}).setdefault(metric, []).append(mv.value)
    if not table:
        raise DataError("quality_table requires at least one match")
    return {
        tag: {metric: float(np.mean(vals)) for metric, vals in per_metric.items()}
        for tag, per_metric in table.items()
    }


def evaluate_frames(
    frames: list[AgedFrame],
    gt_items: list[GroundTruthItem],
    metric_ids=None,
) -> EvaluationReport:
    """Run the full matching protocol for one generated sequence.

    Metrics default to the five intensity measurements plus DSC when
    both the frames and every ground-truth item carry labels.
    """
    if not gt_items:
        raise DataError("evaluation requires at least one ground-truth item")
    if metric_ids is None:
        metric_ids = list(M.INTENSITY_METRICS)
        if all(g.labels is not None for g in gt_items) and all(
            f.labels is not None for f in frames
        ):
            metric_ids.append(M.DSC)

    rmse: dict[str, float] = {}
    regressions: dict[str, RegressionFit] = {}
    matched_for_table: dict[str, list[tuple[str, M.MetricValue]]] = {}
    match_records: dict[str, list[dict]] = {}
    for metric in metric_ids:
        pairs = []
        for gt in gt_items:
            frame, value = match_closest(frames, gt, metric)
            pairs.append((gt, frame, value))
        matched_for_table[metric] = [(gt.tag, value) for gt, _, value in pairs]
        match_records[metric] = [
            {
                "true_age": gt.true_age,
                "estimated_age": frame.age,
                "t": frame.t,
                "tag": gt.tag,
                "value": value.value,
            }
            for gt, frame, value in pairs
        ]
        ages = [(gt.true_age, frame.age) for gt, frame, _ in pairs]
        rmse[metric] = age_rmse(ages)
        if len(ages) >= 3 and len({t for t, _ in ages}) >= 2:
            regressions[metric] = fit_regression(ages)
    return EvaluationReport(
        age_rmse=rmse,
        regressions=regressions,
        quality=quality_table(matched_for_table),
        matches=match_records,
    )


# ---------------------------------------------------------------------------
# file-level entry points

def load_ground_truth(path) -> list[GroundTruthItem]:
    """Ground-truth listing: JSON {"items": [{path, true_age, tag, labels?}]}."""
    p = Path(path)
    if not p.exists():
        raise DataError(f"file not found: {p}")
    try:
        listing = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise DataError(f"{p}: parse error at line {e.lineno}: {e.msg}") from e
    items_spec = listing.get("items")
    if not items_spec:
        raise DataError(f"{p}: ground-truth listing has no items")
    items = []
    for entry in items_spec:
        try:
            img_path = p.parent / entry["path"]
            true_age = float(entry["true_age"])
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"{p}: malformed ground-truth entry {entry!r}: {e}") from e
        labels = None
        if entry.get("labels"):
            labels = asio.read_label_volume(p.parent / entry["labels"])
        items.append(
            GroundTruthItem(
                image=asio.read_volume(img_path),
                true_age=true_age,
                labels=labels,
                tag=str(entry.get("tag", "default")),
            )
        )
    return items


def evaluate_manifest(manifest_path, gt_listing_path, metric_ids=None) -> EvaluationReport:
    load_manifest(manifest_path)  # validates structure early
    frames = load_frames(manifest_path)
    gt_items = load_ground_truth(gt_listing_path)
    return evaluate_frames(frames, gt_items, metric_ids)


def write_report(report: EvaluationReport, outdir) -> tuple[Path, Path]:
    """Serialize a report as report.json plus a flat report.csv table."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "age_rmse": report.age_rmse,
        "regressions": {
            m: {
                "slope": r.slope,
                "intercept": r.intercept,
                "r_squared": r.r_squared,
                "residual_rmse": r.residual_rmse,
            }
            for m, r in report.regressions.items()
        },
        "quality": report.quality,
        "matches": report.matches,
    }
    json_path = out / "report.json"
    json_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    csv_path = out / "report.csv"
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["section", "tag", "metric", "quantity", "value"])
        for metric, v in sorted(report.age_rmse.items()):
            w.writerow(["age", "all", metric, "rmse", f"{v:.10g}"])
        for metric, r in sorted(report.regressions.items()):
            w.writerow(["regression", "all", metric, "slope", f"{r.slope:.10g}"])
            w.writerow(["regression", "all", metric, "intercept", f"{r.intercept:.10g}"])
            w.writerow(["regression", "all", metric, "r_squared", f"{r.r_squared:.10g}"])
            w.writerow(["regression", "all", metric, "residual_rmse", f"{r.residual_rmse:.10g}"])
        for tag, per_metric in sorted(report.quality.items()):
            for metric, v in sorted(per_metric.items()):
                w.writerow(["quality", tag, metric, "mean", f"{v:.10g}"])
    return json_path, csv_path
