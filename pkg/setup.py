"""Builds the optional compiled kernel extension.

The package works without it (a pure-Python fallback is selected at
import time), so any compile failure downgrades to a pure install
instead of aborting.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "ocrflow.kernels._speedups",
                ["src/ocrflow/kernels/_speedups.pyx"],
                include_dirs=[np.get_include()],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
        },
    )
except ImportError:
    ext_modules = []

try:
    setup(ext_modules=ext_modules)
except SystemExit:
    setup(ext_modules=[])
