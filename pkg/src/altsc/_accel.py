"""Backend switch for the hot kernels.

Kernels are written once as plain Python loops and compiled with numba when
it is importable. ``ALTSC_DISABLE_NUMBA=1`` (or a missing numba) routes every
public kernel to the vectorised numpy fallback instead.
"""
import os

_FLAG = os.environ.get("ALTSC_DISABLE_NUMBA", "").strip().lower()

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(func):
    """Compile ``func`` in nopython mode, or hand it back untouched."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
