"""Build script for the compiled grid kernels.

The extension is optional: if Cython or a C compiler is unavailable the
install still succeeds and the package falls back to the pure-numpy
kernels in ``agingsynth._kernels._gridnp``.
"""
from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    extensions = [
        Extension(
            "agingsynth._kernels._gridcy",
            ["src/agingsynth/_kernels/_gridcy.pyx"],
            include_dirs=[numpy.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            # -ffp-contract=off: no FMA contraction, so the compiled kernels
            # round exactly like the numpy fallback.
            extra_compile_args=["-O3", "-ffp-contract=off"],
            optional=True,
        )
    ]
    ext_modules = cythonize(extensions, compiler_directives={"language_level": "3"})

setup(ext_modules=ext_modules)
