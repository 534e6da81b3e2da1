# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled grid kernels (hot path).

Mirrors ``_gridnp`` exactly: float64 interpolation arithmetic in the
same expression order, float32 results. Compiled with FP contraction
disabled so both backends round identically. All loops run without the
GIL, so callers may parallelise at the job level with threads.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef cnp.float32_t f32
ctypedef cnp.int32_t i32


cdef inline double _clampd(double x, double hi) nogil:
    if x < 0.0:
        return 0.0
    if x > hi:
        return hi
    return x


cdef inline double _tri_sample(const f32[:, :, ::1] src,
                               double x, double y, double z,
                               Py_ssize_t nx, Py_ssize_t ny, Py_ssize_t nz) nogil:
    cdef double xc = _clampd(x, nx - 1.0)
    cdef double yc = _clampd(y, ny - 1.0)
    cdef double zc = _clampd(z, nz - 1.0)
    cdef Py_ssize_t ix0 = <Py_ssize_t>xc
    cdef Py_ssize_t iy0 = <Py_ssize_t>yc
    cdef Py_ssize_t iz0 = <Py_ssize_t>zc
    cdef double xd = xc - <double>ix0
    cdef double yd = yc - <double>iy0
    cdef double zd = zc - <double>iz0
    cdef Py_ssize_t ix1 = ix0 + 1 if ix0 + 1 < nx else nx - 1
    cdef Py_ssize_t iy1 = iy0 + 1 if iy0 + 1 < ny else ny - 1
    cdef Py_ssize_t iz1 = iz0 + 1 if iz0 + 1 < nz else nz - 1
    cdef double omx = 1.0 - xd
    cdef double omy = 1.0 - yd
    cdef double omz = 1.0 - zd
    cdef double c00 = (<double>src[ix0, iy0, iz0]) * omx + (<double>src[ix1, iy0, iz0]) * xd
    cdef double c01 = (<double>src[ix0, iy0, iz1]) * omx + (<double>src[ix1, iy0, iz1]) * xd
    cdef double c10 = (<double>src[ix0, iy1, iz0]) * omx + (<double>src[ix1, iy1, iz0]) * xd
    cdef double c11 = (<double>src[ix0, iy1, iz1]) * omx + (<double>src[ix1, iy1, iz1]) * xd
    cdef double c0 = c00 * omy + c10 * yd
    cdef double c1 = c01 * omy + c11 * yd
    return c0 * omz + c1 * zd


cdef inline Py_ssize_t _nearest_index(double x, Py_ssize_t n) nogil:
    return <Py_ssize_t>(_clampd(x, n - 1.0) + 0.5)


def warp_trilinear(const f32[:, :, ::1] src, const f32[:, :, :, ::1] disp):
    """Pull-back warp: out[p] = src[p + disp[p]] with trilinear sampling."""
    cdef Py_ssize_t nx = src.shape[0], ny = src.shape[1], nz = src.shape[2]
    out_arr = np.empty((nx, ny, nz), dtype=np.float32)
    cdef f32[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef double x, y, z
    with nogil:
        for i in range(nx):
            for j in range(ny):
                for k in range(nz):
                    x = i + <double>disp[i, j, k, 0]
                    y = j + <double>disp[i, j, k, 1]
                    z = k + <double>disp[i, j, k, 2]
                    out[i, j, k] = <f32>_tri_sample(src, x, y, z, nx, ny, nz)
    return out_arr


def warp_nearest(const f32[:, :, ::1] src, const f32[:, :, :, ::1] disp):
    cdef Py_ssize_t nx = src.shape[0], ny = src.shape[1], nz = src.shape[2]
    out_arr = np.empty((nx, ny, nz), dtype=np.float32)
    cdef f32[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    with nogil:
        for i in range(nx):
            for j in range(ny):
                for k in range(nz):
                    out[i, j, k] = src[_nearest_index(i + <double>disp[i, j, k, 0], nx),
                                       _nearest_index(j + <double>disp[i, j, k, 1], ny),
                                       _nearest_index(k + <double>disp[i, j, k, 2], nz)]
    return out_arr


def warp_labels_nearest(const i32[:, :, ::1] src, const f32[:, :, :, ::1] disp):
    cdef Py_ssize_t nx = src.shape[0], ny = src.shape[1], nz = src.shape[2]
    out_arr = np.empty((nx, ny, nz), dtype=np.int32)
    cdef i32[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    with nogil:
        for i in range(nx):
            for j in range(ny):
                for k in range(nz):
                    out[i, j, k] = src[_nearest_index(i + <double>disp[i, j, k, 0], nx),
                                       _nearest_index(j + <double>disp[i, j, k, 1], ny),
                                       _nearest_index(k + <double>disp[i, j, k, 2], nz)]
    return out_arr


def compose_disp(const f32[:, :, :, ::1] outer, const f32[:, :, :, ::1] inner):
    """Displacement of outer∘inner: out[p] = inner[p] + outer[p + inner[p]]."""
    cdef Py_ssize_t nx = inner.shape[0], ny = inner.shape[1], nz = inner.shape[2]
    out_arr = np.empty((nx, ny, nz, 3), dtype=np.float32)
    cdef f32[:, :, :, ::1] out = out_arr
    # per-component contiguous views so _tri_sample can be reused
    comp_arr = np.empty((3, nx, ny, nz), dtype=np.float32)
    comp_arr[0] = np.asarray(outer)[..., 0]
    comp_arr[1] = np.asarray(outer)[..., 1]
    comp_arr[2] = np.asarray(outer)[..., 2]
    cdef f32[:, :, ::1] o0 = comp_arr[0]
    cdef f32[:, :, ::1] o1 = comp_arr[1]
    cdef f32[:, :, ::1] o2 = comp_arr[2]
    cdef Py_ssize_t i, j, k
    cdef double x, y, z
    with nogil:
        for i in range(nx):
            for j in range(ny):
                for k in range(nz):
                    x = i + <double>inner[i, j, k, 0]
                    y = j + <double>inner[i, j, k, 1]
                    z = k + <double>inner[i, j, k, 2]
                    out[i, j, k, 0] = <f32>((<double>inner[i, j, k, 0]) + _tri_sample(o0, x, y, z, nx, ny, nz))
                    out[i, j, k, 1] = <f32>((<double>inner[i, j, k, 1]) + _tri_sample(o1, x, y, z, nx, ny, nz))
                    out[i, j, k, 2] = <f32>((<double>inner[i, j, k, 2]) + _tri_sample(o2, x, y, z, nx, ny, nz))
    return out_arr
