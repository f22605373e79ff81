"""Build script: compiles the Cython kernel core when possible.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile only costs speed, never functionality.
Use `pip install -e . --no-build-isolation` in environments that already
ship setuptools/numpy/Cython.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("EFDOSE_SKIP_EXT", "") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext_modules = cythonize(
            ["src/efdose/_kernels/_core.pyx"],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
        include_dirs = [np.get_include()]
    except Exception:
        ext_modules = []
        include_dirs = []
else:
    include_dirs = []

setup(ext_modules=ext_modules, include_dirs=include_dirs)
