"""Backend selection for the LSTM kernels.

The numba backend is used when importable; set ``DKTGRAPH_NO_NUMBA=1`` to
force the pure-numpy fallback. Both backends expose the same functions and
compute the same quantities (up to floating-point rounding of equivalent
expression orderings); `benchmarks/bench_kernels.py` compares their speed.
"""

import os

from . import numpy_backend

def _numba_disabled() -> bool:
    return os.environ.get("DKTGRAPH_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")


if _numba_disabled():
    active = numpy_backend
    BACKEND = "numpy"
else:
    try:
        from . import numba_backend as active

        BACKEND = "numba"
    except ImportError:
        active = numpy_backend
        BACKEND = "numpy"


def get_backend():
    """Return (name, module) of the kernel backend selected at import time."""
    return BACKEND, active
