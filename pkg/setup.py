"""Build script for the optional Cython kernels.

The package works without the compiled extension (a numpy fallback is
selected at import time), so a failed Cython build only emits a warning.
"""
import os
import sys

from setuptools import setup


def _extensions():
    if os.environ.get("PQSL_NO_EXTENSION"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:  # pragma: no cover - build-time only
        print(f"warning: skipping compiled kernels ({exc})", file=sys.stderr)
        return []
    ext = Extension(
        "perturbed_qsl._kernels",
        sources=["src/perturbed_qsl/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3, compiler_directives={"boundscheck": False, "wraparound": False})


setup(ext_modules=_extensions())
