"""Builds the compiled kernel extension.

Project metadata lives in pyproject.toml; this file only wires up the
Cython module. The package works without the extension (a numpy fallback
is selected at import), so a failed build is not fatal for development:
install with DRAWNET_SKIP_EXT=1 to skip compilation.
"""

import os

import numpy as np
from setuptools import setup

if os.environ.get("DRAWNET_SKIP_EXT"):
    ext_modules = []
else:
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "drawnet.tensor._kernels",
                ["src/drawnet/tensor/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
