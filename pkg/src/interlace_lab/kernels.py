"""Backend selection for the hot loops.

The compiled extension is used when importable; setting the environment
variable INTERLACE_LAB_PURE=1 forces the numpy fallback.  ``BACKEND`` names
the active implementation.
"""

from __future__ import annotations

import os

from . import _kernels_py

KIND_HP = _kernels_py.KIND_HP
KIND_DBM = _kernels_py.KIND_DBM
KIND_OU = _kernels_py.KIND_OU
KIND_CIRCLE = _kernels_py.KIND_CIRCLE
KIND_LINEAR1D = _kernels_py.KIND_LINEAR1D

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def get_backend(name: str):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not available; rebuild the package")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


if _compiled is not None and os.environ.get("INTERLACE_LAB_PURE", "") not in ("1", "true", "yes"):
    impl = _compiled
    BACKEND = "cython"
else:
    impl = _kernels_py
    BACKEND = "python"

euler_try = impl.euler_try
reflected_step = impl.reflected_step
pushblock_run = impl.pushblock_run
