"""Build the optional Cython kernel extension.

If Cython or a C compiler is unavailable the package installs without it and
falls back to the NumPy kernels at import time.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("GIVENS_MSV_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "givens_msv._ckernels",
                    ["src/givens_msv/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "initializedcheck": False,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
