"""Builds the optional compiled kernel extension.

The package works without it: cutsem.kernels falls back to a scipy-based
matvec when cutsem._core is missing.
"""

from setuptools import setup
from setuptools.extension import Extension

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "cutsem._core",
                ["src/cutsem/_core.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
