"""Kernel backend selection.

The compiled Cython kernel is preferred; the NumPy twin is used when the
extension is missing or when ``MIDASPANEL_BACKEND=python`` is exported.
``MIDASPANEL_BACKEND=compiled`` makes a missing extension a hard error,
which the benchmark and the backend-equivalence tests rely on.
"""

from __future__ import annotations

import os

from . import _kernel_py

_requested = os.environ.get("MIDASPANEL_BACKEND", "").strip().lower()

if _requested == "python":
    kernel = _kernel_py
elif _requested == "compiled":
    from . import _kernel as kernel  # noqa: F401  (ImportError is the contract)
else:
    try:
        from . import _kernel as kernel
    except ImportError:
        kernel = _kernel_py


def backend_name() -> str:
    """Which sweep implementation is active: 'compiled' or 'python'."""
    return kernel.BACKEND
