"""Recovery and interference metrics (entrywise l2 norms, dB)."""

from __future__ import annotations

import numpy as np

NRE_FLOOR_DB = -300.0


def _db(ratio: float) -> float:
    return 20.0 * np.log10(ratio)


def nre(s_true, s_hat) -> float:
    """Normalized recovery error ``20 log10(||s - s_hat|| / ||s||)`` in dB."""
    s_true = np.asarray(s_true, dtype=float)
    norm_s = np.linalg.norm(s_true)
    if norm_s == 0:
        raise ValueError("true echo is zero; NRE undefined")
    err = np.linalg.norm(s_true - np.asarray(s_hat, dtype=float))
    if err == 0:
        return NRE_FLOOR_DB
    return max(float(_db(err / norm_s)), NRE_FLOOR_DB)


def sinr_db(S, F, E=None) -> float:
    """SINR of echo matrix ``S`` against RFI ``F`` plus optional noise ``E``.

    Without ``E`` this is the measured-RFI definition (the RFI already
    carries its own noise).
    """
    interference = np.asarray(F, dtype=float)
    if E is not None:
        interference = interference + E
    denom = np.linalg.norm(interference)
    if denom == 0:
        raise ValueError("interference has zero norm")
    return float(_db(np.linalg.norm(S) / denom))


def inr_db(F, E) -> float:
    denom = np.linalg.norm(E)
    if denom == 0:
        raise ValueError("noise has zero norm")
    return float(_db(np.linalg.norm(F) / denom))


def spectrum_map(y, n_bins: int | None = None) -> np.ndarray:
    """Per-PRI magnitude spectrum of the fast-time samples.

    Each column is ``|FFT|`` of ``y[:, m]`` zero-padded to ``n_bins`` points
    (default ``4N``), one-sided: bins ``0 .. n_bins/2`` covering ``[0, fs/2]``.
    """
    y = np.asarray(y, dtype=float)
    n_bins = 4 * y.shape[0] if n_bins is None else n_bins
    return np.abs(np.fft.rfft(y, n=n_bins, axis=0))


def spectrum_freqs_hz(n_bins: int, fs_hz: float) -> np.ndarray:
    return np.fft.rfftfreq(n_bins, d=1.0 / fs_hz)
