"""Build script for the optional compiled numerical core.

The package is fully functional without the extension (a NumPy fallback is
selected at import time); building it just makes the hot kernels faster.
"""

import os

from setuptools import setup

ext_modules = []
_PYX = os.path.join("src", "stockloan", "_core_cy.pyx")
if os.path.exists(_PYX):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "stockloan._core_cy",
                    [_PYX],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        # No Cython available: install the pure-Python package only.
        pass

setup(ext_modules=ext_modules)
