"""Core 3D grid types and operations: intensity volumes, label volumes,
vector fields, interpolation, warping, composition and Jacobians.

Conventions (used throughout the package):
  * Vector fields store displacements u in voxel units; the map they
    represent is phi(p) = p + u(p), so the zero field is the identity.
  * Warping is backward (pull-back): out(p) = vol(p + u(p)).
  * Sampling outside the grid clamps to the boundary voxel.
  * Volume data is float32; reductions accumulate in float64.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .errors import DataError, NumericError

VELOCITY = "velocity"
DISPLACEMENT = "displacement"


class Interp(Enum):
    """Interpolation mode. Out-of-grid coordinates clamp to the edge."""

    TRILINEAR = "trilinear"
    NEAREST = "nearest"


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.isfinite(arr).all():
        raise DataError(f"{what} contains non-finite values")


@dataclass(frozen=True, eq=False)
class Volume:
    """Scalar intensity grid with geometry metadata.

    ``dynamic_range`` is the maximum representable intensity (1.0 after
    normalization); it feeds the PSNR and SSIM stabilisation constants.
    """

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    dynamic_range: float = 1.0

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 3:
            raise DataError(f"volume data must be 3D, got {arr.ndim}D")
        _check_finite(arr, "volume")
        if self.dynamic_range <= 0:
            raise DataError("dynamic_range must be positive")
        object.__setattr__(self, "data", _freeze(arr))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    def with_data(self, data: np.ndarray) -> "Volume":
        return Volume(data, self.spacing, self.dynamic_range)


@dataclass(frozen=True, eq=False)
class LabelVolume:
    """Integer segmentation grid; label 0 is reserved for background."""

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.int32)
        if arr.ndim != 3:
            raise DataError(f"label data must be 3D, got {arr.ndim}D")
        if arr.min(initial=0) < 0:
            raise DataError("labels must be non-negative")
        object.__setattr__(self, "data", _freeze(arr))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True, eq=False)
class VectorField:
    """3-component-per-voxel grid, serving as velocity or displacement.

    Components are in voxel units. ``kind`` distinguishes velocity
    fields (inputs to integration) from displacement fields (outputs,
    consumed by warping and composition).
    """

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    kind: str = DISPLACEMENT

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 4 or arr.shape[3] != 3:
            raise DataError(f"vector field data must have shape (nx, ny, nz, 3), got {arr.shape}")
        if self.kind not in (VELOCITY, DISPLACEMENT):
            raise DataError(f"unknown field kind {self.kind!r}")
        _check_finite(arr, "vector field")
        object.__setattr__(self, "data", _freeze(arr))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape[:3]

    def as_kind(self, kind: str) -> "VectorField":
        return VectorField(self.data, self.spacing, kind)

    def scaled(self, factor: float) -> "VectorField":
        return VectorField(self.data * np.float32(factor), self.spacing, self.kind)


def zero_displacement(dims, spacing=(1.0, 1.0, 1.0)) -> VectorField:
    return VectorField(np.zeros((*dims, 3), dtype=np.float32), spacing, DISPLACEMENT)


def _require_same_dims(a_dims, b_dims) -> None:
    if tuple(a_dims) != tuple(b_dims):
        raise DataError(f"dimension mismatch: {tuple(a_dims)} vs {tuple(b_dims)}")


def normalize_intensity(vol: Volume) -> Volume:
    """Affine rescale of intensities to [0, 1]; sets dynamic_range to 1."""
    lo = float(vol.data.min())
    hi = float(vol.data.max())
    if hi <= lo:
        raise NumericError("degenerate intensity range: volume is constant")
    out = (vol.data.astype(np.float64) - lo) / (hi - lo)
    return Volume(out.astype(np.float32), vol.spacing, dynamic_range=1.0)


def sample(vol: Volume, point, interp: Interp = Interp.TRILINEAR) -> float:
    """Sample one continuous voxel coordinate; clamp-to-edge boundary."""
    p = np.asarray(point, dtype=np.float64)
    if p.shape != (3,):
        raise DataError(f"sample point must have 3 coordinates, got shape {p.shape}")
    if not np.isfinite(p).all():
        raise DataError("sample point must be finite")
    nx, ny, nz = vol.dims
    x = min(max(p[0], 0.0), nx - 1.0)
    y = min(max(p[1], 0.0), ny - 1.0)
    z = min(max(p[2], 0.0), nz - 1.0)
    if interp is Interp.NEAREST:
        return float(vol.data[int(x + 0.5), int(y + 0.5), int(z + 0.5)])
    x0, y0, z0 = int(x), int(y), int(z)
    x1, y1, z1 = min(x0 + 1, nx - 1), min(y0 + 1, ny - 1), min(z0 + 1, nz - 1)
    xd, yd, zd = x - x0, y - y0, z - z0
    s = vol.data.astype(np.float64, copy=False)
    c00 = s[x0, y0, z0] * (1 - xd) + s[x1, y0, z0] * xd
    c01 = s[x0, y0, z1] * (1 - xd) + s[x1, y0, z1] * xd
    c10 = s[x0, y1, z0] * (1 - xd) + s[x1, y1, z0] * xd
    c11 = s[x0, y1, z1] * (1 - xd) + s[x1, y1, z1] * xd
    c0 = c00 * (1 - yd) + c10 * yd
    c1 = c01 * (1 - yd) + c11 * yd
    return float(c0 * (1 - zd) + c1 * zd)


def _require_displacement(phi: VectorField) -> None:
    if phi.kind != DISPLACEMENT:
        raise DataError(f"expected a displacement field, got kind {phi.kind!r}")


def warp(vol, phi: VectorField, interp: Interp | None = None):
    """Backward-warp a Volume or LabelVolume by a displacement field.

    out(p) = vol(p + phi(p)). Label volumes always use nearest-neighbor
    sampling; requesting trilinear for them is an error.
    """
    _require_displacement(phi)
    _require_same_dims(vol.dims, phi.dims)
    if isinstance(vol, LabelVolume):
        if interp is Interp.TRILINEAR:
            raise DataError("trilinear interpolation is not valid for label volumes")
        out = _kernels.warp_labels_nearest(vol.data, phi.data)
        return LabelVolume(out, vol.spacing)
    if isinstance(vol, Volume):
        if interp is None:
            interp = Interp.TRILINEAR
        if interp is Interp.NEAREST:
            out = _kernels.warp_nearest(vol.data, phi.data)
        else:
            out = _kernels.warp_trilinear(vol.data, phi.data)
        return Volume(out, vol.spacing, vol.dynamic_range)
    raise DataError(f"cannot warp object of type {type(vol).__name__}")


def compose(outer: VectorField, inner: VectorField) -> VectorField:
    """Displacement of the composed map outer∘inner.

    result(p) = inner(p) + outer(p + inner(p)), with trilinear sampling
    of outer's components and clamp-to-edge boundary.
    """
    _require_displacement(outer)
    _require_displacement(inner)
    _require_same_dims(outer.dims, inner.dims)
    out = _kernels.compose_disp(outer.data, inner.data)
    return VectorField(out, inner.spacing, DISPLACEMENT)


def jacobian_determinant(phi: VectorField) -> Volume:
    """Per-voxel determinant of d(p + u)/dp.

    Central differences in the interior, one-sided at boundaries.
    Positive everywhere iff the map is locally invertible (orientation
    preserving).
    """
    _require_displacement(phi)
    if min(phi.dims) < 3:
        raise DataError("jacobian requires at least 3 voxels per axis")
    u = phi.data.astype(np.float64)
    J = np.empty((3, 3) + phi.dims, dtype=np.float64)
    for c in range(3):
        gx, gy, gz = np.gradient(u[..., c], axis=(0, 1, 2))
        J[c, 0], J[c, 1], J[c, 2] = gx, gy, gz
        J[c, c] += 1.0
    det = (
        J[0, 0] * (J[1, 1] * J[2, 2] - J[1, 2] * J[2, 1])
        - J[0, 1] * (J[1, 0] * J[2, 2] - J[1, 2] * J[2, 0])
        + J[0, 2] * (J[1, 0] * J[2, 1] - J[1, 1] * J[2, 0])
    )
    return Volume(det.astype(np.float32), phi.spacing, dynamic_range=1.0)
