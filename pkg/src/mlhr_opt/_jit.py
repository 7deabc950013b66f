"""Numba switch shared by every hot kernel.

Set ``MLHR_OPT_NUMBA=0`` before import to run the pure numpy/python path.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

_OFF = {"0", "false", "no", "off"}

HAVE_NUMBA = numba is not None
ENABLED = HAVE_NUMBA and os.environ.get("MLHR_OPT_NUMBA", "1").strip().lower() not in _OFF


def jit(fn):
    """``numba.njit`` when enabled, identity otherwise."""
    if not ENABLED:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def py(fn):
    """Return the uncompiled python function behind a kernel."""
    return getattr(fn, "py_func", fn)
