"""Backend switch for the hot loop kernels.

Kernels are written twice: a numba ``@njit`` version and a pure-numpy one.
``REACH_NUMBA=0`` (or a missing numba install) selects numpy at import time.
"""
import os

try:
    import numba
    from numba import njit
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn


def _flag_enabled():
    raw = os.environ.get("REACH_NUMBA", "1").strip().lower()
    return raw not in ("0", "false", "no", "off")


USE_NUMBA = HAS_NUMBA and _flag_enabled()
BACKEND = "numba" if USE_NUMBA else "numpy"


def pick(numba_impl, numpy_impl):
    """Return the implementation matching the active backend."""
    return numba_impl if USE_NUMBA else numpy_impl
