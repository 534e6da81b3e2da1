"""Pure-numpy grid kernels (fallback backend).

Same contracts as the compiled module ``_gridcy``. Interpolation
arithmetic is float64 with a fixed expression order, so both backends
produce bit-identical float32 results (the extension is compiled with
FP contraction disabled).

Conventions shared by both backends:
  * scalar volumes are C-contiguous float32 arrays of shape (nx, ny, nz)
  * displacement fields are float32 arrays of shape (nx, ny, nz, 3),
    components in voxel units
  * sampling coordinates outside the grid clamp to the boundary voxel
"""
from __future__ import annotations

import numpy as np


def _grid_coords(disp: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    nx, ny, nz = disp.shape[:3]
    gx = np.arange(nx, dtype=np.float64)[:, None, None]
    gy = np.arange(ny, dtype=np.float64)[None, :, None]
    gz = np.arange(nz, dtype=np.float64)[None, None, :]
    x = gx + disp[..., 0].astype(np.float64)
    y = gy + disp[..., 1].astype(np.float64)
    z = gz + disp[..., 2].astype(np.float64)
    return x, y, z


def _trilinear_gather(src: np.ndarray, x, y, z) -> np.ndarray:
    """Sample ``src`` at continuous (x, y, z), clamp-to-edge, float64 math."""
    nx, ny, nz = src.shape
    x = np.clip(x, 0.0, nx - 1.0)
    y = np.clip(y, 0.0, ny - 1.0)
    z = np.clip(z, 0.0, nz - 1.0)
    x0f = np.floor(x)
    y0f = np.floor(y)
    z0f = np.floor(z)
    xd = x - x0f
    yd = y - y0f
    zd = z - z0f
    ix0 = x0f.astype(np.intp)
    iy0 = y0f.astype(np.intp)
    iz0 = z0f.astype(np.intp)
    ix1 = np.minimum(ix0 + 1, nx - 1)
    iy1 = np.minimum(iy0 + 1, ny - 1)
    iz1 = np.minimum(iz0 + 1, nz - 1)

    s = src.astype(np.float64, copy=False)
    omx = 1.0 - xd
    omy = 1.0 - yd
    omz = 1.0 - zd
    c00 = s[ix0, iy0, iz0] * omx + s[ix1, iy0, iz0] * xd
    c01 = s[ix0, iy0, iz1] * omx + s[ix1, iy0, iz1] * xd
    c10 = s[ix0, iy1, iz0] * omx + s[ix1, iy1, iz0] * xd
    c11 = s[ix0, iy1, iz1] * omx + s[ix1, iy1, iz1] * xd
    c0 = c00 * omy + c10 * yd
    c1 = c01 * omy + c11 * yd
    return c0 * omz + c1 * zd


def _nearest_indices(shape, x, y, z):
    nx, ny, nz = shape
    ix = np.floor(np.clip(x, 0.0, nx - 1.0) + 0.5).astype(np.intp)
    iy = np.floor(np.clip(y, 0.0, ny - 1.0) + 0.5).astype(np.intp)
    iz = np.floor(np.clip(z, 0.0, nz - 1.0) + 0.5).astype(np.intp)
    return ix, iy, iz


def warp_trilinear(src: np.ndarray, disp: np.ndarray) -> np.ndarray:
    """Pull-back warp: out[p] = src[p + disp[p]] with trilinear sampling."""
    x, y, z = _grid_coords(disp)
    return _trilinear_gather(src, x, y, z).astype(np.float32)


def warp_nearest(src: np.ndarray, disp: np.ndarray) -> np.ndarray:
    x, y, z = _grid_coords(disp)
    ix, iy, iz = _nearest_indices(src.shape, x, y, z)
    return src[ix, iy, iz].astype(np.float32)


def warp_labels_nearest(src: np.ndarray, disp: np.ndarray) -> np.ndarray:
    x, y, z = _grid_coords(disp)
    ix, iy, iz = _nearest_indices(src.shape, x, y, z)
    return np.ascontiguousarray(src[ix, iy, iz], dtype=np.int32)


def compose_disp(outer: np.ndarray, inner: np.ndarray) -> np.ndarray:
    """Displacement of outer∘inner: out[p] = inner[p] + outer[p + inner[p]]."""
    x, y, z = _grid_coords(inner)
    out = np.empty(inner.shape, dtype=np.float32)
    for c in range(3):
        sampled = _trilinear_gather(outer[..., c], x, y, z)
        out[..., c] = (inner[..., c].astype(np.float64) + sampled).astype(np.float32)
    return out
