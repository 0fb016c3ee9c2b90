"""Numba switch for the hot kernels.

Hot routines exist twice: an explicit-loop version compiled with numba and a
vectorised numpy version. ``SPARTANBO_DISABLE_NUMBA=1`` (read at import time)
makes the package dispatch to the numpy versions. The compiled versions stay
importable either way, so both paths can be compared in one process.
"""

import os

_FALSEY = {"", "0", "false", "no", "off"}

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and (
    os.environ.get("SPARTANBO_DISABLE_NUMBA", "0").strip().lower() in _FALSEY
)


def jit(func):
    """Compile lazily with ``numba.njit(cache=True)``; no-op without numba."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True)(func)


def pick(compiled, fallback):
    return compiled if USE_NUMBA else fallback


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
