"""Optional numba acceleration.

Set FROZEN_ER_JIT=0 to run every kernel as plain Python over numpy arrays.
Compiled kernels keep the original function on ``.py_func`` so both paths
can be compared in one process.
"""
import os

USE_NUMBA = os.environ.get("FROZEN_ER_JIT", "1").strip().lower() not in ("0", "false", "no", "off")

if USE_NUMBA:
    try:
        import numba
    except ImportError:  # pragma: no cover
        USE_NUMBA = False


def jit(fn=None, *, inline=False):
    """Compile with numba when enabled. inline=True inlines the function into
    compiled callers, which avoids per-call array reference counting."""
    if fn is None:
        return lambda f: jit(f, inline=inline)
    if USE_NUMBA:
        opts = {"inline": "always"} if inline else {}
        return numba.njit(cache=True, nogil=True, **opts)(fn)
    fn.py_func = fn
    return fn


def worker_count():
    cap = os.environ.get("FROZEN_ER_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = max(1, min(n, int(cap)))
        except ValueError:
            pass
    return n
