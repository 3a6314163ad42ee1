"""Numba switch.

Set ``MIMADV_DISABLE_NUMBA=1`` before import to force the pure-numpy kernels.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is an optional accelerator
    numba = None

HAVE_NUMBA = numba is not None
DISABLED = os.environ.get("MIMADV_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")
USE_NUMBA = HAVE_NUMBA and not DISABLED


def njit(func):
    """Compile ``func`` with numba when it is importable, otherwise return it unchanged."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, fastmath=False)(func)
