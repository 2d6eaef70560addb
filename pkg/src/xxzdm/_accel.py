"""Optional numba acceleration.

Kernels in :mod:`xxzdm._kernels` are written once, in the subset of numpy that
numba compiles, and wrapped with :func:`jit`. Setting ``XXZDM_DISABLE_JIT=1``
(or running without numba installed) leaves them as plain Python/numpy
functions, which is the reference path the compiled one is benchmarked against.
"""
import os

_FLAG = "XXZDM_DISABLE_JIT"

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get(_FLAG, "").strip().lower() not in (
    "1",
    "true",
    "yes",
    "on",
)


def jit(fn):
    """Compile ``fn`` with ``numba.njit`` when acceleration is enabled."""
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


def backend():
    return "numba" if USE_NUMBA else "numpy"
