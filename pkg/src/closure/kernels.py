"""Backend selection for the hot kernels.

The compiled extension is used when it imports; setting ``CLOSURE_PURE_PYTHON=1``
forces the numpy / pure-Python fallback. Both expose the same functions and
produce identical results.
"""

import os

from . import _kernels_py

if os.environ.get("CLOSURE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"

margins_3d3d = _impl.margins_3d3d
margins_2d3d = _impl.margins_2d3d
margins_reg = _impl.margins_reg
miniball_support = _impl.miniball_support


def backend_module(name: str):
    """Return the kernel module for ``"cython"`` or ``"python"`` (for benchmarks and tests)."""
    if name == "python":
        return _kernels_py
    from . import _kernels

    return _kernels
