"""agingsynth: subject-specific aging MRI sequence synthesis.

Given two acquisitions of one subject, a stationary velocity field is
integrated to intermediate (and extrapolated) time points, each frame
is scored against the older acquisition to calibrate the stopping
point, and ages are assigned under a linear progression model.
"""
from ._kernels import BACKEND
from .errors import AgingSynthError, DataError, NumericError
from .evaluation import (
    EvaluationReport,
    GroundTruthItem,
    RegressionFit,
    age_rmse,
    evaluate_frames,
    evaluate_manifest,
    fit_regression,
    match_closest,
    quality_table,
)
from .metrics import (
    ALL_METRICS,
    INTENSITY_METRICS,
    MetricValue,
    SsimParams,
    dsc,
    mae,
    ncc,
    nfn,
    psnr,
    ssim,
)
from .phantom import PhantomSpec, make_phantom, make_phantom_series
from .pipeline import (
    AgedFrame,
    GenerationPlan,
    PipelineParams,
    SubjectPair,
    emit_manifest,
    load_frames,
    load_manifest,
    plan_generation,
    run_subject,
)
from .qcm import MetricCurve, StoppingPointReport, adjust_stopping_point, score_curve
from .registration import DemonsParams, estimate_svf, load_velocity_field
from .svf import (
    IntegrationParams,
    TimeGrid,
    exp_field,
    exp_field_scaling_squaring,
    integrate_sequence,
)
from .volume import (
    Interp,
    LabelVolume,
    VectorField,
    Volume,
    compose,
    jacobian_determinant,
    normalize_intensity,
    sample,
    warp,
    zero_displacement,
)

__version__ = "0.1.0"

__all__ = [
    "AgedFrame",
    "AgingSynthError",
    "ALL_METRICS",
    "BACKEND",
    "DataError",
    "DemonsParams",
    "EvaluationReport",
    "GenerationPlan",
    "GroundTruthItem",
    "INTENSITY_METRICS",
    "IntegrationParams",
    "Interp",
    "LabelVolume",
    "MetricCurve",
    "MetricValue",
    "NumericError",
    "PhantomSpec",
    "PipelineParams",
    "RegressionFit",
    "SsimParams",
    "StoppingPointReport",
    "SubjectPair",
    "TimeGrid",
    "VectorField",
    "Volume",
    "adjust_stopping_point",
    "age_rmse",
    "compose",
    "dsc",
    "emit_manifest",
    "estimate_svf",
    "evaluate_frames",
    "evaluate_manifest",
    "exp_field",
    "exp_field_scaling_squaring",
    "fit_regression",
    "integrate_sequence",
    "jacobian_determinant",
    "load_frames",
    "load_manifest",
    "load_velocity_field",
    "mae",
    "make_phantom",
    "make_phantom_series",
    "match_closest",
    "ncc",
    "nfn",
    "normalize_intensity",
    "plan_generation",
    "psnr",
    "quality_table",
    "run_subject",
    "sample",
    "score_curve",
    "ssim",
    "warp",
    "zero_displacement",
]
