"""Backend selection for the numeric kernels.

Set ``POSTFIXGP_DISABLE_NUMBA=1`` to force the pure-numpy path even when
numba is importable. The flag is read once, at import time.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba = None

HAVE_NUMBA = numba is not None
DISABLED = os.environ.get("POSTFIXGP_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")
USE_NUMBA = HAVE_NUMBA and not DISABLED

# error_model="numpy" keeps IEEE semantics (1/0 -> inf) instead of raising.
JIT_OPTIONS = {"cache": True, "nogil": True, "error_model": "numpy"}


def njit(func=None, **options):
    """Compile ``func`` with numba, or return it unchanged on the numpy path."""
    def wrap(f):
        if not USE_NUMBA:
            return f
        return numba.njit(**{**JIT_OPTIONS, **options})(f)

    if func is None:
        return wrap
    return wrap(func)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"


def set_threads(n):
    """Set the worker count used by the parallel evaluation kernel."""
    if USE_NUMBA and n and n > 1:
        numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))
