"""Build script for the optional compiled solver kernel.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed build is downgraded to a warning.
"""

import warnings

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "midaspanel.solver._kernel",
                ["src/midaspanel/solver/_kernel.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    warnings.warn(f"building without compiled kernel: {exc}")

setup(ext_modules=ext_modules)
