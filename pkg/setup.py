"""Build script for the compiled raster kernels.

The package works without the extension (the numpy fallback in
``sketchtint.kernels.fallback`` is selected at import time), so a failed
cythonize is tolerated rather than fatal.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "sketchtint.kernels._native",
                sources=["src/sketchtint/kernels/_native.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
