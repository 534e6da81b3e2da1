"""The six pairwise similarity measurements used for quality control:
MAE, SSIM, NCC, PSNR, NFN and DSC.

All intensity metrics reduce over the full grid in float64. SSIM is the
global (whole-volume moments) form with population variances; NCC is
the absolute normalized cross-correlation of mean-centered volumes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericError
from .volume import LabelVolume, Volume

MAE = "mae"
SSIM = "ssim"
NCC = "ncc"
PSNR = "psnr"
NFN = "nfn"
DSC = "dsc"

INTENSITY_METRICS = (MAE, SSIM, NCC, PSNR, NFN)
ALL_METRICS = (MAE, SSIM, NCC, PSNR, NFN, DSC)

LOWER_IS_BETTER = {MAE: True, NFN: True, SSIM: False, NCC: False, PSNR: False, DSC: False}


@dataclass(frozen=True)
class SsimParams:
    """Stabilisation constants for SSIM: C1 = (k1·Q)², C2 = (k2·Q)²."""

    k1: float = 0.01
    k2: float = 0.02
    dynamic_range: float = 1.0

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2


@dataclass(frozen=True)
class MetricValue:
    metric: str
    value: float

    @property
    def lower_is_better(self) -> bool:
        return LOWER_IS_BETTER[self.metric]

    def better_than(self, other: "MetricValue") -> bool:
        if self.metric != other.metric:
            raise DataError(f"cannot compare {self.metric} with {other.metric}")
        if self.lower_is_better:
            return self.value < other.value
        return self.value > other.value


def _as_f64_pair(a: Volume, b: Volume) -> tuple[np.ndarray, np.ndarray]:
    if a.dims != b.dims:
        raise DataError(f"dimension mismatch: {a.dims} vs {b.dims}")
    return a.data.astype(np.float64), b.data.astype(np.float64)


def mae(a: Volume, b: Volume) -> MetricValue:
    """Mean absolute voxel difference."""
    x, y = _as_f64_pair(a, b)
    return MetricValue(MAE, float(np.mean(np.abs(x - y))))


def ssim(a: Volume, b: Volume, params: SsimParams | None = None) -> MetricValue:
    """Global structural similarity from whole-volume moments."""
    x, y = _as_f64_pair(a, b)
    if params is None:
        params = SsimParams(dynamic_range=a.dynamic_range)
    mu1 = float(x.mean())
    mu2 = float(y.mean())
    var1 = float(np.mean((x - mu1) ** 2))
    var2 = float(np.mean((y - mu2) ** 2))
    cov = float(np.mean((x - mu1) * (y - mu2)))
    c1, c2 = params.c1, params.c2
    value = ((2 * mu1 * mu2 + c1) * (2 * cov + c2)) / (
        (mu1 * mu1 + mu2 * mu2 + c1) * (var1 + var2 + c2)
    )
    return MetricValue(SSIM, value)


def ncc(a: Volume, b: Volume) -> MetricValue:
    """Absolute normalized cross-correlation of the mean-centered volumes."""
    x, y = _as_f64_pair(a, b)
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.sum(xc * xc))
    sy = float(np.sum(yc * yc))
    if sx == 0.0 or sy == 0.0:
        raise NumericError("zero variance: NCC is undefined for constant volumes")
    return MetricValue(NCC, abs(float(np.sum(xc * yc))) / math.sqrt(sx * sy))


def psnr(a: Volume, b: Volume, dynamic_range: float | None = None) -> MetricValue:
    """Peak signal-to-noise ratio, 10·log10(Q²/MSE), in dB."""
    x, y = _as_f64_pair(a, b)
    q = a.dynamic_range if dynamic_range is None else float(dynamic_range)
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        raise NumericError("identical inputs, PSNR unbounded")
    return MetricValue(PSNR, 10.0 * math.log10(q * q / mse))


def nfn(a: Volume, b: Volume) -> MetricValue:
    """Root-mean-square voxel difference (normalized Frobenius norm)."""
    x, y = _as_f64_pair(a, b)
    return MetricValue(NFN, math.sqrt(float(np.mean((x - y) ** 2))))


def dsc(a: LabelVolume, b: LabelVolume, labels=None) -> MetricValue:
    """Mean Dice overlap 2|A∩B|/(|A|+|B|) over nonzero labels.

    Labels absent from both volumes are skipped; by default the label
    set is every nonzero label present in either volume.
    """
    if a.dims != b.dims:
        raise DataError(f"dimension mismatch: {a.dims} vs {b.dims}")
    if labels is None:
        label_set = np.union1d(np.unique(a.data), np.unique(b.data))
        label_set = [int(l) for l in label_set if l != 0]
    else:
        label_set = [int(l) for l in labels if int(l) != 0]
    scores = []
    for lab in label_set:
        in_a = a.data == lab
        in_b = b.data == lab
        na = int(in_a.sum())
        nb = int(in_b.sum())
        if na + nb == 0:
            continue
        inter = int(np.logical_and(in_a, in_b).sum())
        scores.append(2.0 * inter / (na + nb))
    if not scores:
        raise NumericError("no nonzero labels present in either volume")
    return MetricValue(DSC, float(np.mean(scores)))


def compute(metric: str, a, b, labels_a: LabelVolume | None = None,
            labels_b: LabelVolume | None = None) -> MetricValue:
    """Dispatch one metric by name; DSC is computed on the label pair."""
    if metric == DSC:
        if labels_a is None or labels_b is None:
            raise DataError("dsc requires label volumes for both inputs")
        return dsc(labels_a, labels_b)
    if metric == MAE:
        return mae(a, b)
    if metric == SSIM:
        return ssim(a, b)
    if metric == NCC:
        return ncc(a, b)
    if metric == PSNR:
        return psnr(a, b)
    if metric == NFN:
        return nfn(a, b)
    raise DataError(f"unknown metric {metric!r}")
