"""Elementwise probit kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import time from ``ONEBIT_SPICE_BACKEND``
(``numba`` or ``numpy``). Without the variable, numba is used when it can be
imported.
"""

from __future__ import annotations

import os

from . import _numpy

BACKEND_ENV = "ONEBIT_SPICE_BACKEND"


def _select():
    wanted = os.environ.get(BACKEND_ENV, "").strip().lower()
    if wanted not in ("", "numba", "numpy"):
        raise ImportError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {wanted!r}")
    if wanted == "numpy":
        return "numpy", _numpy
    try:
        from . import _numba
    except ImportError:
        if wanted == "numba":
            raise
        return "numpy", _numpy
    return "numba", _numba


BACKEND, _impl = _select()

normal_ratio = _impl.normal_ratio
log_ndtr = _impl.log_ndtr
surrogate = _impl.surrogate
nll = _impl.nll
positive_counts = _impl.positive_counts


def available_backends() -> dict:
    """Map of backend name to implementation module for the ones importable here."""
    out = {"numpy": _numpy}
    try:
        from . import _numba
        out["numba"] = _numba
    except ImportError:
        pass
    return out
