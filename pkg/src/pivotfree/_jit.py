"""Optional numba acceleration.

Kernels are written as plain Python loops over numpy arrays and decorated
with :func:`kernel`.  When numba is importable and ``PIVOTFREE_NO_JIT`` is
unset (or ``0``), they are compiled with ``numba.njit``; otherwise the
undecorated Python functions run as-is.  The flag is read once at import.
"""

import os

_flag = os.environ.get("PIVOTFREE_NO_JIT", "").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    import numba

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False

JIT_ENABLED = HAVE_NUMBA


def kernel(fn):
    """Compile ``fn`` with numba if enabled; keep the Python body reachable
    as ``fn.py_func`` in both modes."""
    if JIT_ENABLED:
        return numba.njit(cache=True, nogil=True)(fn)
    fn.py_func = fn
    return fn
