"""Velocity field sources: load a precomputed field from disk, or
estimate one with a classical multiresolution log-domain demons scheme.

The estimator iterates: warp the moving image by exp(v, 1), compute the
intensity-driven demons force, smooth it, take a damped step on v, and
smooth v. Everything is deterministic for fixed inputs and parameters.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter, map_coordinates

from . import _kernels
from .errors import DataError
from .io import read_vector_field
from .volume import VELOCITY, VectorField, Volume

log = logging.getLogger(__name__)

_FORCE_EPS = 1e-6
_EXP_SQUARINGS = 6  # 2^6 = 64 effective integration steps inside the loop


@dataclass(frozen=True)
class DemonsParams:
    iterations: int = 200
    update_smoothing_sigma: float = 2.0
    field_smoothing_sigma: float = 1.0
    step_scale: float = 0.5
    multiresolution_levels: int = 3

    def __post_init__(self):
        if self.iterations < 1:
            raise DataError("iterations must be >= 1")
        if self.update_smoothing_sigma < 0 or self.field_smoothing_sigma < 0:
            raise DataError("smoothing sigmas must be >= 0")
        if self.multiresolution_levels < 1:
            raise DataError("multiresolution_levels must be >= 1")
        if not (self.step_scale > 0):
            raise DataError("step_scale must be positive")


def load_velocity_field(path, reference: Volume | None = None) -> VectorField:
    """Read a 3-component field from disk and tag it as a velocity."""
    field = read_vector_field(path, kind=VELOCITY)
    if reference is not None and field.dims != reference.dims:
        raise DataError(
            f"dimension mismatch: field {field.dims} vs reference volume {reference.dims}"
        )
    return field


def _downsample2(img: np.ndarray) -> np.ndarray:
    """Factor-2 box downsampling (odd trailing voxels are dropped)."""
    nx, ny, nz = (d // 2 * 2 for d in img.shape)
    c = img[:nx, :ny, :nz].reshape(nx // 2, 2, ny // 2, 2, nz // 2, 2)
    return c.mean(axis=(1, 3, 5), dtype=np.float64).astype(np.float32)


def _upsample_field(field: np.ndarray, fine_dims) -> np.ndarray:
    """Trilinear upsample of a coarse field onto a finer grid, values x2.

    Coarse voxel j covers fine voxels {2j, 2j+1}, so fine coordinate x
    maps to coarse coordinate (x - 0.5) / 2.
    """
    coords = [
        (np.arange(n, dtype=np.float64) - 0.5) / 2.0 for n in fine_dims
    ]
    cx, cy, cz = np.meshgrid(*coords, indexing="ij")
    out = np.empty((*fine_dims, 3), dtype=np.float32)
    for c in range(3):
        out[..., c] = 2.0 * map_coordinates(
            field[..., c].astype(np.float64), [cx, cy, cz], order=1, mode="nearest"
        )
    return out


def _exp_unit(v: np.ndarray) -> np.ndarray:
    """Displacement of exp(v) at unit time via scaling and squaring."""
    u = (v.astype(np.float64) / float(2**_EXP_SQUARINGS)).astype(np.float32)
    for _ in range(_EXP_SQUARINGS):
        u = _kernels.compose_disp(u, u)
    return u


def _ssd(a: np.ndarray, b: np.ndarray) -> float:
    d = a.astype(np.float64) - b.astype(np.float64)
    return float(np.sum(d * d))


def _smooth_field(field: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0:
        return field
    out = np.empty_like(field)
    for c in range(3):
        gaussian_filter(field[..., c], sigma=sigma, output=out[..., c], mode="nearest")
    return out


def _demons_level(moving: np.ndarray, fixed: np.ndarray, v: np.ndarray,
                  params: DemonsParams) -> np.ndarray:
    for _ in range(params.iterations):
        warped = _kernels.warp_trilinear(moving, _exp_unit(v))
        diff = fixed.astype(np.float64) - warped.astype(np.float64)
        gx, gy, gz = np.gradient(warped.astype(np.float64), axis=(0, 1, 2))
        denom = gx * gx + gy * gy + gz * gz + diff * diff + _FORCE_EPS
        scale = diff / denom
        force = np.stack((gx * scale, gy * scale, gz * scale), axis=-1).astype(np.float32)
        update = _smooth_field(force, params.update_smoothing_sigma)
        v = v + np.float32(params.step_scale) * update
        v = _smooth_field(v, params.field_smoothing_sigma)
    return v


def estimate_svf(moving: Volume, fixed: Volume, params: DemonsParams | None = None,
                 trace: list | None = None) -> VectorField:
    """Estimate a stationary velocity field mapping moving onto fixed.

    Both inputs must share dimensions and be intensity-normalized to
    [0, 1]. If ``trace`` is a list, one dict per resolution level is
    appended with the full-resolution SSD after that level.
    """
    if params is None:
        params = DemonsParams()
    if moving.dims != fixed.dims:
        raise DataError(f"dimension mismatch: {moving.dims} vs {fixed.dims}")
    for name, vol in (("moving", moving), ("fixed", fixed)):
        lo, hi = float(vol.data.min()), float(vol.data.max())
        if lo < -1e-6 or hi > 1.0 + 1e-6:
            raise DataError(
                f"{name} volume is not normalized to [0, 1] (range [{lo:g}, {hi:g}])"
            )

    levels = params.multiresolution_levels
    pyramid = [(moving.data, fixed.data)]
    for _ in range(levels - 1):
        m, f = pyramid[-1]
        if min(m.shape) < 8:
            break
        pyramid.append((_downsample2(m), _downsample2(f)))
    pyramid.reverse()  # coarse -> fine

    ssd_initial = _ssd(moving.data, fixed.data)
    v = np.zeros((*pyramid[0][0].shape, 3), dtype=np.float32)
    for level, (m_lvl, f_lvl) in enumerate(pyramid):
        if v.shape[:3] != m_lvl.shape:
            v = _upsample_field(v, m_lvl.shape)
        v = _demons_level(m_lvl, f_lvl, v, params)
        if trace is not None:
            v_full = v
            dims = m_lvl.shape
            for fine_idx in range(level + 1, len(pyramid)):
                dims = pyramid[fine_idx][0].shape
                v_full = _upsample_field(v_full, dims)
            ssd_full = _ssd(_kernels.warp_trilinear(moving.data, _exp_unit(v_full)),
                            fixed.data)
            trace.append({"level": level, "grid": m_lvl.shape, "ssd_full": ssd_full})

    ssd_final = _ssd(_kernels.warp_trilinear(moving.data, _exp_unit(v)), fixed.data)
    log.debug("demons: SSD %.6g -> %.6g", ssd_initial, ssd_final)
    if ssd_final > ssd_initial:
        # no improvement over the identity: return the safe zero field
        log.warning("demons failed to improve SSD; returning zero field")
        v = np.zeros_like(v)
    return VectorField(v, moving.spacing, VELOCITY)
