"""Optional numba acceleration.

Kernels are written once as plain loops over numpy arrays. When numba is
importable and ``FMPAIR_DISABLE_JIT`` is unset (or "0"), they are compiled
with ``numba.njit``; otherwise the undecorated Python functions run as-is.
The flag is read once at import, so switching paths needs a new process.
"""

import os

_flag = os.environ.get("FMPAIR_DISABLE_JIT", "").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    import numba

    HAS_NUMBA = True
except ImportError:
    numba = None
    HAS_NUMBA = False


def njit(func):
    # fastmath stays off: both paths must agree bit for bit
    if HAS_NUMBA:
        return numba.njit(cache=True, nogil=True)(func)
    func.py_func = func
    return func
