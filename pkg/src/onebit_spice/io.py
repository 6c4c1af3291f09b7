"""Measured-RFI file format and CSV matrix export.

A measured-RFI record is a raw file of little-endian float32 samples stored
column-major (fast time fastest) plus a JSON sidecar at ``<path>.json``::

    {"n_fast": 512, "m_slow": 8192, "fs_hz": 8e9,
     "dtype": "f32le", "layout": "col-major"}
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

DTYPE = "f32le"
LAYOUT = "col-major"
_REQUIRED = ("n_fast", "m_slow", "fs_hz", "dtype", "layout")


class IngestError(ValueError):
    pass


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def read_sidecar(path) -> dict:
    side = sidecar_path(path)
    if not side.exists():
        raise IngestError(f"missing sidecar {side}")
    try:
        meta = json.loads(side.read_text())
    except json.JSONDecodeError as exc:
        raise IngestError(f"sidecar {side} is not valid JSON: {exc}") from exc
    missing = [k for k in _REQUIRED if k not in meta]
    if missing:
        raise IngestError(f"sidecar {side} lacks {', '.join(missing)}")
    if meta["dtype"] != DTYPE:
        raise IngestError(f"unsupported dtype {meta['dtype']!r} (only {DTYPE!r})")
    if meta["layout"] != LAYOUT:
        raise IngestError(f"unsupported layout {meta['layout']!r} (only {LAYOUT!r})")
    for key in ("n_fast", "m_slow"):
        val = meta[key]
        if not isinstance(val, int) or isinstance(val, bool) or val < 1:
            raise IngestError(f"{key} must be a positive integer, got {val!r}")
    if not float(meta["fs_hz"]) > 0:
        raise IngestError("fs_hz must be positive")
    return meta


def ingest_measured_rfi(path) -> np.ndarray:
    """Load an N x M measured-RFI matrix (float64) after validating size and sidecar."""
    path = Path(path)
    meta = read_sidecar(path)
    if not path.exists():
        raise IngestError(f"missing data file {path}")
    n, m = meta["n_fast"], meta["m_slow"]
    expected = 4 * n * m
    size = path.stat().st_size
    if size != expected:
        raise IngestError(f"size mismatch: {path} has {size} bytes, expected {expected} "
                          f"for {n} x {m} float32")
    raw = np.fromfile(path, dtype="<f4")
    return raw.reshape((n, m), order="F").astype(np.float64)


def export_measured_rfi(path, rfi, fs_hz: float) -> Path:
    """Write ``rfi`` in the ingest format. Values are stored as float32."""
    rfi = np.asarray(rfi)
    if rfi.ndim != 2:
        raise ValueError("RFI must be an N x M matrix")
    path = Path(path)
    np.asfortranarray(rfi.astype("<f4")).ravel(order="F").tofile(path)
    meta = {"n_fast": int(rfi.shape[0]), "m_slow": int(rfi.shape[1]), "fs_hz": float(fs_hz),
            "dtype": DTYPE, "layout": LAYOUT}
    sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")
    return path


def write_matrix_csv(path, matrix, header=None) -> None:
    """Plain CSV of a real matrix (one row per line), ``repr`` precision."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w", newline="") as fh:
        if header is not None:
            fh.write(",".join(header) + "\n")
        for row in matrix:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
