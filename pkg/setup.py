"""Build script for the optional compiled kernel extension.

The package works without the extension (a numpy fallback is selected at
import time), so the extension is marked optional: a failed C build must
not fail the install.
"""
import os

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    if not os.path.exists("src/dtameta/kernels/_core.pyx"):
        raise ImportError
    ext_modules = cythonize(
        [
            Extension(
                "dtameta.kernels._core",
                ["src/dtameta/kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
