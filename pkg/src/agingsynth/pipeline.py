"""End-to-end subject pipeline: obtain a velocity field for an image
pair, integrate it to a sequence of deformations, score the generated
frames to adjust the stopping point, regenerate at the adjusted point,
warp labels along, and assign ages under the linear progression model.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

from . import io as asio
from . import metrics as M
from .errors import DataError
from .qcm import MetricCurve, StoppingPointReport, adjust_stopping_point, score_curve, write_curves_csv
from .registration import DemonsParams, estimate_svf, load_velocity_field
from .svf import IntegrationParams, TimeGrid, integrate_sequence
from .volume import Interp, LabelVolume, VectorField, Volume, warp

DEFAULT_INITIAL_S = 3.0
MEAN_COMBINATION = "mean"


@dataclass(frozen=True, eq=False)
class SubjectPair:
    """A younger (moving) and an older (fixed) acquisition of one subject."""

    subject_id: str
    moving: Volume
    age_moving: float
    fixed: Volume
    age_fixed: float
    labels_moving: LabelVolume | None = None

    def __post_init__(self):
        if not (self.age_fixed > self.age_moving):
            raise DataError("fixed must be older than moving (age_fixed > age_moving)")
        if self.moving.dims != self.fixed.dims:
            raise DataError(
                f"dimension mismatch: moving {self.moving.dims} vs fixed {self.fixed.dims}"
            )
        if self.labels_moving is not None and self.labels_moving.dims != self.moving.dims:
            raise DataError("dimension mismatch: labels vs moving volume")

    @property
    def age_delta(self) -> float:
        return self.age_fixed - self.age_moving


@dataclass(frozen=True)
class GenerationPlan:
    """Frame count and spacing for one subject.

    The frame count doubles the age difference (two frames per year,
    i.e. one synthetic image every six months before adjustment), with
    a floor of two frames.
    """

    initial_s: float
    n_frames: int
    time_step: float
    age_step: float

    def __post_init__(self):
        if self.initial_s <= 0:
            raise DataError("initial stopping point must be positive")
        if self.n_frames < 1:
            raise DataError("frame count must be >= 1")


@dataclass(frozen=True, eq=False)
class AgedFrame:
    """One synthetic volume with its integration time and assigned age."""

    image: Volume
    t: float
    age: float
    labels: LabelVolume | None = None
    extrapolated: bool = False


def plan_generation(pair: SubjectPair, initial_s: float = DEFAULT_INITIAL_S) -> GenerationPlan:
    """Frame plan from the pair's age difference: N = max(2, round(2·δ))."""
    delta = pair.age_delta
    if delta <= 0:
        raise DataError("age difference must be positive")
    n = max(2, int(math.floor(2.0 * delta + 0.5)))
    return GenerationPlan(
        initial_s=float(initial_s),
        n_frames=n,
        time_step=float(initial_s) / n,
        age_step=delta / n,
    )


@dataclass(frozen=True)
class PipelineParams:
    """Knobs for run_subject; the stopping metric is either the mean
    combination or one specific metric's best time."""

    integration: IntegrationParams = IntegrationParams()
    stopping_metric: str = MEAN_COMBINATION
    demons: DemonsParams = DemonsParams()

    def __post_init__(self):
        if self.stopping_metric != MEAN_COMBINATION and self.stopping_metric not in M.ALL_METRICS:
            raise DataError(f"unknown stopping metric {self.stopping_metric!r}")


def _resolve_velocity(pair: SubjectPair, velocity, params: PipelineParams) -> VectorField:
    if velocity is None:
        return estimate_svf(pair.moving, pair.fixed, params.demons)
    if isinstance(velocity, (str, Path)):
        return load_velocity_field(velocity, reference=pair.moving)
    if isinstance(velocity, VectorField):
        if velocity.dims != pair.moving.dims:
            raise DataError(
                f"dimension mismatch: field {velocity.dims} vs volume {pair.moving.dims}"
            )
        return velocity
    raise DataError(f"invalid velocity source of type {type(velocity).__name__}")


def _assign_age(pair: SubjectPair, t: float, s_adj: float, is_last: bool) -> float:
    if is_last:
        return pair.age_fixed  # t == s_adj, ratio exactly 1
    return pair.age_moving + (t / s_adj) * (pair.age_fixed - pair.age_moving)


def run_subject(
    pair: SubjectPair,
    plan: GenerationPlan,
    velocity=None,
    params: PipelineParams | None = None,
    curves_out: list[MetricCurve] | None = None,
) -> tuple[list[AgedFrame], StoppingPointReport]:
    """Generate the aged sequence for one subject pair.

    ``velocity`` may be a VectorField, a path to a stored field, or None
    to estimate one from the pair. Stages: integrate to the initial
    stopping point, score the frames to adjust it, regenerate on
    (0, s_adj], warp labels with nearest-neighbor, and assign ages.
    Pass a list as ``curves_out`` to collect the quality-control curves.
    """
    if params is None:
        params = PipelineParams()
    v = _resolve_velocity(pair, velocity, params)

    # first pass: frames up to the initial stopping point
    grid1 = TimeGrid(plan.initial_s, plan.n_frames)
    fields1 = integrate_sequence(v, grid1, params.integration)
    frames1 = [warp(pair.moving, f) for f in fields1]

    # quality control: per-metric best stopping points on the intensity
    # metrics (DSC needs a fixed-image segmentation, which a pair does
    # not carry)
    curves = [score_curve(frames1, pair.fixed, grid1, m) for m in M.INTENSITY_METRICS]
    report = adjust_stopping_point(curves)
    if curves_out is not None:
        curves_out.extend(curves)
    if params.stopping_metric == MEAN_COMBINATION:
        s_adj = report.mean_s
    else:
        s_adj = report.best_t[params.stopping_metric]

    # second pass: regenerate on (0, s_adj] with the same velocity field
    grid2 = TimeGrid(s_adj, plan.n_frames)
    fields2 = integrate_sequence(v, grid2, params.integration)
    frames = []
    for k, (t, field) in enumerate(zip(grid2.times, fields2)):
        image = warp(pair.moving, field)
        labels = None
        if pair.labels_moving is not None:
            labels = warp(pair.labels_moving, field, Interp.NEAREST)
        age = _assign_age(pair, t, s_adj, is_last=(k == plan.n_frames - 1))
        frames.append(AgedFrame(image=image, t=t, age=age, labels=labels))
    return frames, report


# ---------------------------------------------------------------------------
# manifest emission and loading

def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def emit_manifest(
    frames: list[AgedFrame],
    report: StoppingPointReport,
    outdir,
    subject_id: str,
    adjusted_s: float,
    config: dict | None = None,
    curves: list[MetricCurve] | None = None,
) -> Path:
    """Write frames (and labels) as NIfTI plus a JSON manifest.

    Layout: <outdir>/frame_<k>.nii.gz, labels_<k>.nii.gz, manifest.json
    and curves.csv. Output bytes are deterministic for identical inputs.
    """
    if not frames:
        raise DataError("cannot emit an empty frame sequence")
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for k, frame in enumerate(frames, start=1):
        name = f"frame_{k:03d}.nii.gz"
        asio.write_volume(frame.image, out / name)
        entry = {"k": k, "t": frame.t, "age": frame.age, "path": name}
        if frame.labels is not None:
            lab_name = f"labels_{k:03d}.nii.gz"
            asio.write_label_volume(frame.labels, out / lab_name)
            entry["labels_path"] = lab_name
        entries.append(entry)
    if curves:
        write_curves_csv(curves, out / "curves.csv")
    manifest = {
        "subject_id": subject_id,
        "adjusted_s": adjusted_s,
        "mean_s": report.mean_s,
        "best_t": dict(sorted(report.best_t.items())),
        "config_hash": config_hash(config or {}),
        "frames": entries,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_manifest(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise DataError(f"file not found: {p}")
    try:
        manifest = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise DataError(f"{p}: parse error at line {e.lineno}: {e.msg}") from e
    for key in ("subject_id", "frames"):
        if key not in manifest:
            raise DataError(f"{p}: manifest is missing the {key!r} field")
    return manifest


def load_frames(manifest_path) -> list[AgedFrame]:
    """Reload the synthetic frames referenced by a manifest."""
    p = Path(manifest_path)
    manifest = load_manifest(p)
    frames = []
    for entry in manifest["frames"]:
        try:
            t, age, rel = float(entry["t"]), float(entry["age"]), entry["path"]
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"{p}: malformed frame entry {entry!r}: {e}") from e
        image = asio.read_volume(p.parent / rel)
        labels = None
        if entry.get("labels_path"):
            labels = asio.read_label_volume(p.parent / entry["labels_path"])
        frames.append(AgedFrame(image=image, t=t, age=age, labels=labels))
    if not frames:
        raise DataError(f"{p}: manifest lists no frames")
    return frames
