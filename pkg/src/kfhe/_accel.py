"""Numba switch.

Set ``KFHE_DISABLE_NUMBA=1`` before import to run every kernel through its
pure-numpy twin. Both paths return identical results; the flag only changes
speed.
"""

import os

_FLAG = os.environ.get("KFHE_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

USE_NUMBA = numba is not None and _FLAG not in ("1", "true", "yes", "on")


def njit(func):
    """Compile ``func`` in nopython mode, or return it untouched when numba is off."""
    if numba is None:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def pick(numba_impl, numpy_impl):
    return numba_impl if USE_NUMBA else numpy_impl
