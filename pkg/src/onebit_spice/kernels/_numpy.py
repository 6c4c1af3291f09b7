"""Vectorized numpy/scipy implementations of the elementwise probit kernels."""

from __future__ import annotations

import numpy as np
from scipy import special

_SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)
_INV_SQRT2 = 1.0 / np.sqrt(2.0)


def normal_ratio(x):
    """-phi(x)/Phi(x), finite for every finite x."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    neg = x < 0
    # left half: phi/Phi = sqrt(2/pi) / erfcx(-x/sqrt2), no underflow
    out[neg] = -_SQRT_2_OVER_PI / special.erfcx(-x[neg] * _INV_SQRT2)
    xp = x[~neg]
    out[~neg] = -_INV_SQRT_2PI * np.exp(-0.5 * xp * xp) / special.ndtr(xp)
    return out


def log_ndtr(x):
    return special.log_ndtr(np.asarray(x, dtype=float))


def surrogate(z, mean, levels, eta):
    gamma = z * (mean - eta * levels[None, :])
    return z * (gamma - normal_ratio(gamma))


def nll(z, mean, levels, eta):
    gamma = z * (mean - eta * levels[None, :])
    # column sums first, then a sequential pass: same order as the numba kernel
    col = -np.sum(log_ndtr(gamma), axis=0)
    total = 0.0
    for v in col:
        total += v
    return float(total)


def positive_counts(z):
    return np.count_nonzero(np.asarray(z) > 0, axis=1).astype(float)
