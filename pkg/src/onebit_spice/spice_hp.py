"""Weighted SPICE for high-precision (unquantized) data.

Covers the SPICE, LIKES and IAA weight rules on the augmented model
``A = [B, I]``. Besides being a standalone sparse estimator, ``hp_step`` is
the reference the one-bit solver's coefficient update is checked against.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg

KINDS = ("SPICE", "LIKES", "IAA")
P_FLOOR_REL = 1e-12


@dataclass(frozen=True)
class HpModel:
    regressors: np.ndarray  # N x K
    powers: np.ndarray  # K + N, last N are noise powers

    def __post_init__(self):
        n, k = self.regressors.shape
        if self.powers.shape != (k + n,):
            raise ValueError(f"powers must have length {k + n}")
        if np.any(self.powers < 0):
            raise ValueError("powers must be non-negative")

    @property
    def n(self) -> int:
        return self.regressors.shape[0]

    @property
    def k(self) -> int:
        return self.regressors.shape[1]

    @property
    def augmented(self) -> np.ndarray:
        return np.hstack([self.regressors.astype(complex), np.eye(self.n)])

    def with_powers(self, powers) -> "HpModel":
        return replace(self, powers=np.asarray(powers, dtype=float))


class HpCovariance:
    """Cholesky factor of ``R = B Px B^H + diag(pe)``."""

    def __init__(self, model: HpModel, rcond_min: float = 1e-14):
        B = model.regressors
        px, pe = model.powers[: model.k], model.powers[model.k:]
        R = (B * px) @ B.conj().T + np.diag(pe).astype(complex)
        R = 0.5 * (R + R.conj().T)
        d = np.real(np.diag(R))
        if np.min(d) <= 0:
            raise np.linalg.LinAlgError("covariance has a non-positive diagonal")
        try:
            self._factor = linalg.cho_factor(R, lower=True)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError("covariance is not positive definite") from exc
        diag_l = np.abs(np.diag(self._factor[0]))
        if (diag_l.min() / diag_l.max()) ** 2 < rcond_min:
            raise np.linalg.LinAlgError("covariance is numerically singular")
        self.matrix = R

    def solve(self, v):
        return linalg.cho_solve(self._factor, v)


def hp_weights(kind: str, model: HpModel, cov: HpCovariance | None = None) -> np.ndarray:
    """Weights of the SPICE / LIKES / IAA criteria for every column of ``[B, I]``."""
    kind = kind.upper()
    if kind not in KINDS:
        raise ValueError(f"unknown weight rule {kind!r}")
    A = model.augmented
    if kind == "SPICE":
        return np.real(np.sum(A.conj() * A, axis=0))
    if cov is None:
        cov = HpCovariance(model)
    quad = np.real(np.sum(A.conj() * cov.solve(A), axis=0))
    if kind == "LIKES":
        return quad
    return model.powers * quad**2


def floor_powers(p: np.ndarray) -> np.ndarray:
    top = np.max(p)
    if top <= 0:
        raise ValueError("all powers are zero; no update direction")
    return np.maximum(p, P_FLOOR_REL * top)


def spice_objective(y, model: HpModel, weights, cov: HpCovariance | None = None) -> float:
    """``y^H R^-1 y + sum_k w_k p_k``."""
    if cov is None:
        cov = HpCovariance(model)
    y = np.asarray(y)
    fit = np.real(np.vdot(y, cov.solve(y)))
    return float(fit + np.dot(weights, model.powers))


def hp_step(y, model: HpModel, weights, cov: HpCovariance | None = None):
    """One majorize-minimize step.

    Returns ``(x_breve, p_new)`` with ``x_breve = P A^H R^-1 y`` (the LMMSE
    estimate for the regressor block) and ``p_new = |x_breve| / sqrt(w)``.
    """
    p = model.powers
    if not np.any(p > 0):
        raise ValueError("all powers are zero; no update direction")
    weights = np.asarray(weights, dtype=float)
    active = p > 0
    if np.any(weights[active] <= 0):
        raise ValueError("weights must be positive where powers are positive")
    if cov is None:
        cov = HpCovariance(model)
    y = np.asarray(y, dtype=complex)
    r_inv_y = cov.solve(y)
    k = model.k
    x_breve = np.empty(k + model.n, dtype=complex)
    x_breve[:k] = p[:k] * (model.regressors.conj().T @ r_inv_y)
    x_breve[k:] = p[k:] * r_inv_y
    p_new = np.zeros_like(p)
    p_new[active] = np.abs(x_breve[active]) / np.sqrt(weights[active])
    return x_breve, p_new


def initial_powers(y, B) -> np.ndarray:
    """Periodogram-style start: ``|b^H y|^2 / ||b||^4`` and ``|y_n|^2`` for noise."""
    y = np.asarray(y, dtype=complex)
    norms = np.real(np.sum(B.conj() * B, axis=0))
    px = np.abs(B.conj().T @ y) ** 2 / np.where(norms > 0, norms, 1.0) ** 2
    pe = np.abs(y) ** 2
    p = np.concatenate([px, pe])
    if not np.any(p > 0):
        # zero data; any positive start collapses toward zero powers
        p = np.ones_like(p)
    return p


def hp_run(y, B, kind: str = "SPICE", max_iter: int = 500, tol: float = 1e-6,
           p0=None):
    """Iterate weights + step until the relative power change drops below ``tol``.

    Returns ``(p, x)`` where ``p`` covers ``[B, I]`` and ``x`` is the last
    LMMSE estimate. Emits a RuntimeWarning when ``max_iter`` is reached.
    """
    B = np.asarray(B)
    y = np.asarray(y, dtype=complex)
    p = floor_powers(initial_powers(y, B) if p0 is None else np.asarray(p0, dtype=float))
    model = HpModel(regressors=B, powers=p)
    x = np.zeros(B.shape[1] + B.shape[0], dtype=complex)
    converged = False
    for _ in range(max_iter):
        cov = HpCovariance(model)
        w = hp_weights(kind, model, cov)
        x, p_new = hp_step(y, model, w, cov)
        p_old = model.powers
        if not np.any(p_new > 0):
            model = model.with_powers(np.zeros_like(p_old))
            converged = True
            break
        p_new = floor_powers(p_new)
        model = model.with_powers(p_new)
        if np.linalg.norm(p_new - p_old) / np.linalg.norm(p_old) < tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"hp_run did not converge in {max_iter} iterations", RuntimeWarning)
    return model.powers, x
