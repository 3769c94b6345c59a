"""Numba switch.

Set ``LIPGO_NO_NUMBA=1`` to force the pure-numpy kernels, e.g. for debugging
or on platforms without numba.
"""

import os

_DISABLED = os.environ.get("LIPGO_NO_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:  # pragma: no cover - depends on environment
    from numba import njit as _njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    _njit = None
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and not _DISABLED


def njit(fn):
    """Compile ``fn`` with numba when available, else return it untouched.

    The undecorated function stays reachable as ``fn.py_func`` either way so
    tests can exercise the loop body without the compiler.
    """
    if _njit is None:
        fn.py_func = fn
        return fn
    return _njit(cache=True, nogil=True)(fn)
