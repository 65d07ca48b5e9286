"""Numba acceleration shim.

Every hot kernel in this package is decorated with :func:`njit` imported
from here.  When numba is installed and ``DRIVESIM_NUMBA`` is not set to
``0``, the decorator is numba's ``njit(cache=True)``; otherwise it is a
no-op and the kernels run as plain numpy/Python.  Both paths compute the
same thing (see ``benchmarks/bench_engine.py`` for the speed difference).
"""

import os

try:
    import numba as _numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via DRIVESIM_NUMBA=0
    _numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("DRIVESIM_NUMBA", "1") != "0"


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` or an identity decorator, per USE_NUMBA."""
    if USE_NUMBA:
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def identity(func):
        return func

    return identity
