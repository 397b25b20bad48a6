"""Build script: compiles the optional Cython propagation kernel.

The package is fully functional without the extension (a numpy fallback is
selected at import time), so a failed extension build is downgraded to a
warning rather than aborting the install.
"""

import warnings

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "raselab._mbe_core",
                ["src/raselab/_mbe_core.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - exercised only on broken toolchains
    warnings.warn(f"building without compiled kernel: {exc}")
    ext_modules = []

setup(ext_modules=ext_modules)
