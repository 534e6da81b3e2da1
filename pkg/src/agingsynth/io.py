"""Volume and vector-field serialization.

Two formats:
  * NIfTI-1 (.nii / .nii.gz), single file, little-endian. Scalar grids
    are written as 3D images; vector fields as 5D images with three
    components on the 5th axis and the vector intent code, which is how
    common registration tools store displacement/velocity fields.
  * A raw little-endian float32 blob with a JSON sidecar (dims, spacing,
    kind) — a trivially parseable format used by the test suite.

Gzip members are written with a fixed mtime so identical data produces
identical bytes.
"""
from __future__ import annotations

import gzip
import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError
from .volume import DISPLACEMENT, VELOCITY, LabelVolume, VectorField, Volume

_HDR_SIZE = 348
_VOX_OFFSET = 352.0
_MAGIC_SINGLE = b"n+1\x00"
_MAGIC_PAIR = b"ni1\x00"
_INTENT_VECTOR = 1007

# NIfTI datatype code -> numpy dtype (little-endian)
_DTYPES = {
    2: "u1",
    4: "i2",
    8: "i4",
    16: "f4",
    64: "f8",
    256: "i1",
    512: "u2",
    768: "u4",
}

_HDR_STRUCT = struct.Struct(
    "<i"      # sizeof_hdr
    "10s18si" # data_type, db_name, extents
    "hcc"     # session_error, regular, dim_info
    "8h"      # dim
    "3f"      # intent_p1..3
    "h"       # intent_code
    "hhh"     # datatype, bitpix, slice_start
    "8f"      # pixdim
    "f"       # vox_offset
    "ff"      # scl_slope, scl_inter
    "hcc"     # slice_end, slice_code, xyzt_units
    "ffff"    # cal_max, cal_min, slice_duration, toffset
    "ii"      # glmax, glmin
    "80s24s"  # descrip, aux_file
    "hh"      # qform_code, sform_code
    "6f"      # quatern_b..d, qoffset_x..z
    "4f4f4f"  # srow_x, srow_y, srow_z
    "16s"     # intent_name
    "4s"      # magic
)
assert _HDR_STRUCT.size == _HDR_SIZE


def _read_bytes(path: Path) -> bytes:
    if not path.exists():
        raise DataError(f"file not found: {path}")
    try:
        if path.name.endswith(".gz"):
            with gzip.open(path, "rb") as f:
                return f.read()
        return path.read_bytes()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e


def _write_bytes(path: Path, blob: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.name.endswith(".gz"):
        with open(path, "wb") as raw:
            # mtime=0 and no filename field: deterministic bytes
            with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
                f.write(blob)
    else:
        path.write_bytes(blob)


def _pack_header(dims, spacing, n_components, datatype, bitpix, cal_max) -> bytes:
    nx, ny, nz = dims
    sx, sy, sz = spacing
    if n_components == 1:
        dim = (3, nx, ny, nz, 1, 1, 1, 1)
        intent = 0
    else:
        dim = (5, nx, ny, nz, 1, n_components, 1, 1)
        intent = _INTENT_VECTOR
    return _HDR_STRUCT.pack(
        _HDR_SIZE,
        b"", b"", 0,
        0, b"r", b"\x00",
        *dim,
        0.0, 0.0, 0.0,
        intent,
        datatype, bitpix, 0,
        0.0, sx, sy, sz, 1.0, 1.0, 1.0, 1.0,
        _VOX_OFFSET,
        1.0, 0.0,
        0, b"\x00", b"\x02",  # spatial units: mm
        cal_max, 0.0, 0.0, 0.0,
        0, 0,
        b"", b"",
        0, 1,  # qform unset, sform = scaled identity
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        sx, 0.0, 0.0, 0.0,
        0.0, sy, 0.0, 0.0,
        0.0, 0.0, sz, 0.0,
        b"",
        _MAGIC_SINGLE,
    )


def _serialize(data4: np.ndarray, spacing, cal_max: float, as_labels: bool) -> bytes:
    """data4: (nx, ny, nz, ncomp) array; writes x-fastest order."""
    nx, ny, nz, nc = data4.shape
    if as_labels:
        datatype, bitpix = 8, 32
        payload = np.ascontiguousarray(data4.astype("<i4"))
    else:
        datatype, bitpix = 16, 32
        payload = np.ascontiguousarray(data4.astype("<f4"))
    hdr = _pack_header((nx, ny, nz), spacing, nc, datatype, bitpix, cal_max)
    # on-disk axis order: x, y, z, t, component (x fastest)
    disk = payload.reshape(nx, ny, nz, 1, nc)
    body = disk.transpose(4, 3, 2, 1, 0).tobytes()
    return hdr + b"\x00" * 4 + body


def write_volume(vol: Volume, path) -> None:
    _write_bytes(Path(path), _serialize(vol.data[..., None], vol.spacing,
                                        float(vol.dynamic_range), as_labels=False))


def write_label_volume(lab: LabelVolume, path) -> None:
    _write_bytes(Path(path), _serialize(lab.data[..., None], lab.spacing, 0.0, as_labels=True))


def write_vector_field(field: VectorField, path) -> None:
    _write_bytes(Path(path), _serialize(field.data, field.spacing, 0.0, as_labels=False))


class _Parsed:
    __slots__ = ("data", "spacing", "n_components", "cal_max")

    def __init__(self, data, spacing, n_components, cal_max):
        self.data = data
        self.spacing = spacing
        self.n_components = n_components
        self.cal_max = cal_max


def _parse(path: Path) -> _Parsed:
    blob = _read_bytes(path)
    if len(blob) < _HDR_SIZE:
        raise DataError(f"{path}: too short to be a NIfTI-1 file")
    sizeof_hdr = struct.unpack_from("<i", blob, 0)[0]
    swapped = False
    if sizeof_hdr != _HDR_SIZE:
        sizeof_hdr = struct.unpack_from(">i", blob, 0)[0]
        if sizeof_hdr != _HDR_SIZE:
            raise DataError(f"{path}: not a NIfTI-1 file (bad header size)")
        swapped = True
    endian = ">" if swapped else "<"

    dim = struct.unpack_from(endian + "8h", blob, 40)
    datatype, bitpix = struct.unpack_from(endian + "hh", blob, 70)
    pixdim = struct.unpack_from(endian + "8f", blob, 76)
    vox_offset = struct.unpack_from(endian + "f", blob, 108)[0]
    scl_slope, scl_inter = struct.unpack_from(endian + "ff", blob, 112)
    cal_max = struct.unpack_from(endian + "f", blob, 124)[0]
    magic = struct.unpack_from("4s", blob, 344)[0]

    if magic == _MAGIC_PAIR:
        raise DataError(f"{path}: two-file NIfTI (.hdr/.img) is not supported")
    if magic != _MAGIC_SINGLE:
        raise DataError(f"{path}: not a single-file NIfTI-1 volume (bad magic)")
    ndim = dim[0]
    if ndim < 3 or ndim > 5:
        raise DataError(f"{path}: unsupported dimensionality {ndim}")
    nx, ny, nz = dim[1], dim[2], dim[3]
    nt = dim[4] if ndim >= 4 else 1
    nc = dim[5] if ndim >= 5 else 1
    if nt not in (0, 1):
        if nc in (0, 1):
            # vectors occasionally stored on the 4th axis
            nt, nc = 1, nt
        else:
            raise DataError(f"{path}: time series volumes are not supported")
    nc = max(nc, 1)
    if datatype not in _DTYPES:
        raise DataError(f"{path}: unsupported NIfTI datatype code {datatype}")

    dtype = np.dtype(endian + _DTYPES[datatype])
    count = nx * ny * nz * nc
    offset = int(vox_offset)
    if len(blob) < offset + count * dtype.itemsize:
        raise DataError(f"{path}: truncated data section")
    flat = np.frombuffer(blob, dtype=dtype, count=count, offset=offset)
    # undo x-fastest disk order
    data = flat.reshape(nc, 1, nz, ny, nx).transpose(4, 3, 2, 1, 0)[:, :, :, 0, :]
    data = data.astype(np.float64)
    if scl_slope not in (0.0, 1.0) or scl_inter != 0.0:
        slope = scl_slope if scl_slope != 0.0 else 1.0
        data = data * slope + scl_inter
    spacing = (float(pixdim[1]) or 1.0, float(pixdim[2]) or 1.0, float(pixdim[3]) or 1.0)
    return _Parsed(data, spacing, nc, float(cal_max))


def read_volume(path) -> Volume:
    p = _parse(Path(path))
    if p.n_components != 1:
        raise DataError(f"{path}: expected a scalar volume, found {p.n_components} components")
    q = p.cal_max if p.cal_max > 0 else 1.0
    return Volume(p.data[..., 0].astype(np.float32), p.spacing, dynamic_range=q)


def read_label_volume(path) -> LabelVolume:
    p = _parse(Path(path))
    if p.n_components != 1:
        raise DataError(f"{path}: expected a scalar label volume, found {p.n_components} components")
    data = p.data[..., 0]
    rounded = np.rint(data)
    if not np.allclose(data, rounded, atol=1e-6):
        raise DataError(f"{path}: label volume has non-integer values")
    return LabelVolume(rounded.astype(np.int32), p.spacing)


def read_vector_field(path, kind: str = DISPLACEMENT) -> VectorField:
    p = _parse(Path(path))
    if p.n_components != 3:
        raise DataError(f"{path}: expected 3 components, found {p.n_components}")
    return VectorField(p.data.astype(np.float32), p.spacing, kind)


# ---------------------------------------------------------------------------
# raw float32 blob + sidecar

_RAW_KINDS = ("scalar", "labels", VELOCITY, DISPLACEMENT)


def write_raw(obj, basepath) -> None:
    """Write <basepath>.f32 (little-endian float32) + <basepath>.json sidecar."""
    base = Path(basepath)
    if isinstance(obj, Volume):
        kind, data = "scalar", obj.data
    elif isinstance(obj, LabelVolume):
        kind, data = "labels", obj.data.astype(np.float32)
    elif isinstance(obj, VectorField):
        kind, data = obj.kind, obj.data
    else:
        raise DataError(f"cannot serialize object of type {type(obj).__name__}")
    sidecar = {"dims": list(data.shape[:3]), "spacing": list(obj.spacing), "kind": kind}
    base.parent.mkdir(parents=True, exist_ok=True)
    base.with_suffix(".f32").write_bytes(np.ascontiguousarray(data.astype("<f4")).tobytes())
    base.with_suffix(".json").write_text(json.dumps(sidecar, sort_keys=True) + "\n")


def read_raw(basepath):
    base = Path(basepath)
    sidecar_path = base.with_suffix(".json")
    blob_path = base.with_suffix(".f32")
    for p in (sidecar_path, blob_path):
        if not p.exists():
            raise DataError(f"file not found: {p}")
    try:
        meta = json.loads(sidecar_path.read_text())
    except json.JSONDecodeError as e:
        raise DataError(f"{sidecar_path}: parse error at line {e.lineno}: {e.msg}") from e
    try:
        dims = tuple(int(d) for d in meta["dims"])
        spacing = tuple(float(s) for s in meta["spacing"])
        kind = meta["kind"]
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"{sidecar_path}: invalid sidecar: {e}") from e
    if kind not in _RAW_KINDS:
        raise DataError(f"{sidecar_path}: unknown kind {kind!r}")
    flat = np.frombuffer(blob_path.read_bytes(), dtype="<f4")
    n_comp = 3 if kind in (VELOCITY, DISPLACEMENT) else 1
    expected = dims[0] * dims[1] * dims[2] * n_comp
    if flat.size != expected:
        raise DataError(f"{blob_path}: expected {expected} values, found {flat.size}")
    if kind == "scalar":
        return Volume(flat.reshape(dims), spacing)
    if kind == "labels":
        return LabelVolume(np.rint(flat.reshape(dims)).astype(np.int32), spacing)
    return VectorField(flat.reshape((*dims, 3)), spacing, kind)
