"""Build script: compiles the optional curve-integrator extension when Cython
and a C compiler are available.  The package falls back to a pure-Python
implementation with identical semantics, so the extension is best effort.

Set PSEUDOMCF_PURE=1 to skip the extension build entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("PSEUDOMCF_PURE", "") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "pseudomcf.alcurve._speedup",
                    ["src/pseudomcf/alcurve/_speedup.pyx"],
                )
            ],
            language_level="3",
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
