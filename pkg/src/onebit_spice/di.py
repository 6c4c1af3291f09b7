"""Digital-integration baseline: count threshold crossings along slow time."""

from __future__ import annotations

import numpy as np

from . import kernels
from .model import SignedCpi


def recover_di(cpi: SignedCpi) -> np.ndarray:
    """High-precision echo estimate from the +1 count of each fast-time row.

    ``s_n = dh * #{m : z[n, m] = +1} - h_max - dh``. The lower saturation at
    ``-h_max - dh`` is kept as is.
    """
    dh = cpi.schedule.delta_h
    counts = kernels.positive_counts(cpi.z)
    return dh * counts - cpi.schedule.h_max - dh
