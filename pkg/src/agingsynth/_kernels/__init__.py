"""Grid kernel dispatch: compiled core with a pure-numpy fallback.

The compiled extension (``_gridcy``) is used when importable; otherwise
the numpy implementation (``_gridnp``) takes over with identical
numerical results. Set ``AGINGSYNTH_BACKEND=python`` or ``=cython`` to
force a backend; ``cython`` raises if the extension is not built.
"""
import os

from . import _gridnp

_requested = os.environ.get("AGINGSYNTH_BACKEND", "auto").lower()

if _requested == "python":
    _impl = _gridnp
    BACKEND = "python"
elif _requested in ("auto", "cython"):
    try:
        from . import _gridcy as _impl
        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise ImportError(
                "AGINGSYNTH_BACKEND=cython but the compiled kernels are not built; "
                "reinstall with a C compiler available"
            )
        _impl = _gridnp
        BACKEND = "python"
else:
    raise ValueError(f"unknown AGINGSYNTH_BACKEND value {_requested!r}")

warp_trilinear = _impl.warp_trilinear
warp_nearest = _impl.warp_nearest
warp_labels_nearest = _impl.warp_labels_nearest
compose_disp = _impl.compose_disp
