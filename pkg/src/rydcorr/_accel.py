"""Optional numba acceleration.

Kernels are written in the numba-compatible subset of numpy. When numba is
missing, or ``RYDCORR_DISABLE_NUMBA`` is set to a truthy value, the undecorated
Python functions run instead. The flag is read once at import time.
"""

import os

_FLAG = os.environ.get("RYDCORR_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and _FLAG not in ("1", "true", "yes", "on")


def njit(fn):
    """Compile ``fn`` with ``numba.njit(cache=True)`` when acceleration is on."""
    if not USE_NUMBA:
        return fn
    return numba.njit(cache=True)(fn)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
