"""Pick the integrator kernel at import time.

The compiled kernel is used when it was built; ``ERGOLAB_BACKEND=python``
forces the pure-Python one (the benchmark and the kernel-agreement tests
use this switch per call through :func:`kernel_class`).
"""
from __future__ import annotations

import os

from . import _dopri

try:
    from . import _kernels  # type: ignore[attr-defined]
except ImportError:  # extension not built
    _kernels = None

AVAILABLE = ("cython", "python") if _kernels is not None else ("python",)


def kernel_class(name: str | None = None):
    name = name or os.environ.get("ERGOLAB_BACKEND") or AVAILABLE[0]
    if name == "cython":
        if _kernels is None:
            raise ImportError("compiled kernel not built; reinstall with Cython and a C compiler")
        return _kernels.PolyKernel
    if name == "python":
        return _dopri.PolyKernel
    raise ValueError(f"unknown backend {name!r}")


BACKEND = os.environ.get("ERGOLAB_BACKEND") or AVAILABLE[0]
