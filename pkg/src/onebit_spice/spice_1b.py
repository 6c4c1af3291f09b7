"""One-bit weighted SPICE: joint RFI mitigation and echo recovery from signs.

Each MM iteration replaces the probit likelihood by a quadratic surrogate
built from pseudo-data ``eta*h_m + g_m`` and then runs one weighted-SPICE
step on it (noise covariance 2I). The Fourier coefficients are never stored
as a K1 x M array inside :func:`solve`; the loop keeps only the N x M fitted
mean, the per-atom row powers ``sum_m |x1[k, m]|^2`` and the shared echo
coefficients.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import linalg
from scipy.optimize import minimize_scalar
from scipy.special import log_ndtr

from . import kernels
from .model import DictionaryPair, SignedCpi, ThresholdSchedule

log = logging.getLogger(__name__)

KINDS = ("SPICE", "LIKES", "IAA")
COUPLINGS = ("exact", "averaged")


@dataclass(frozen=True)
class SolverOptions:
    kind: str = "LIKES"
    xi: float | None = None  # None -> 0.4 * M
    max_iter: int = 100
    tol: float = 1e-6
    pri_block: int = 512
    eta_init: str | float = "probit"  # "probit", "unit" or a positive number
    coupling: str = "exact"

    def __post_init__(self):
        object.__setattr__(self, "kind", self.kind.upper())
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.xi is not None and not self.xi > 0:
            raise ValueError("xi must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.pri_block < 1:
            raise ValueError("pri_block must be >= 1")
        if self.coupling not in COUPLINGS:
            raise ValueError(f"coupling must be one of {COUPLINGS}, got {self.coupling!r}")
        if isinstance(self.eta_init, str):
            if self.eta_init not in ("probit", "unit"):
                raise ValueError(f"unknown eta_init {self.eta_init!r}")
        elif not float(self.eta_init) > 0:
            raise ValueError("numeric eta_init must be positive")

    def xi_for(self, m_slow: int) -> float:
        return 0.4 * m_slow if self.xi is None else float(self.xi)


@dataclass
class SolverState:
    """Iterate of the MM loop.

    ``x1_scaled`` is only populated for explicit (small) runs; the streamed
    solver works from ``row_power`` and ``fitted_mean``.
    """

    x2_scaled: np.ndarray
    eta: float
    p: np.ndarray
    w: np.ndarray
    fitted_mean: np.ndarray
    row_power: np.ndarray
    iter: int = 0
    x1_scaled: np.ndarray | None = None

    def split_p(self, k1: int):
        return self.p[:k1], self.p[k1:]

    def split_w(self, k1: int):
        return self.w[:k1], self.w[k1:]


@dataclass
class RecoveryResult:
    s_hat: np.ndarray
    x2_hat: np.ndarray
    eta_hat: float
    rfi_power: np.ndarray
    iterations: int
    converged: bool
    objective_trace: np.ndarray
    p_change_trace: np.ndarray = field(default_factory=lambda: np.empty(0))
    diagnostic: str = ""


def mirror_rows(half: np.ndarray) -> np.ndarray:
    """Stack ``half`` (first K1/2 Fourier rows) with its conjugate mirror."""
    return np.concatenate([half, half[::-1].conj()], axis=0)


class Covariance:
    """``R = A1 P1 A1^H + A2 P2 A2^T + 2 I`` with one Cholesky factorization.

    When ``p1`` is symmetric under the conjugate pairing ``R`` is real and
    only half of the Fourier grid is touched.
    """

    def __init__(self, dicts: DictionaryPair, p: np.ndarray):
        A1, A2 = dicts.fourier.atoms, dicts.pulse.atoms
        k1 = A1.shape[1]
        p = np.asarray(p, dtype=float)
        if np.any(p < 0):
            raise ValueError("powers must be non-negative")
        p1, p2 = p[:k1], p[k1:]
        n = A1.shape[0]
        self.paired = bool(np.array_equal(p1, p1[::-1]))
        if self.paired:
            half = A1[:, : k1 // 2]
            self.rfi = 2.0 * np.real((half * p1[: k1 // 2]) @ half.conj().T)
        else:
            self.rfi = (A1 * p1) @ A1.conj().T
        self.echo = (A2 * p2) @ A2.T
        R = self.rfi + self.echo + 2.0 * np.eye(n)
        self.matrix = 0.5 * (R + R.conj().T)
        self._factor = linalg.cho_factor(self.matrix, lower=True, check_finite=False)
        self._rfi_factor = None

    def solve(self, v):
        """``R^-1 v``."""
        return linalg.cho_solve(self._factor, v, check_finite=False)

    def solve_rfi(self, v):
        """``R1^-1 v`` with ``R1 = A1 P1 A1^H + 2I`` (echo term left out)."""
        if self._rfi_factor is None:
            R1 = self.rfi + 2.0 * np.eye(self.rfi.shape[0])
            self._rfi_factor = linalg.cho_factor(0.5 * (R1 + R1.conj().T), lower=True,
                                                 check_finite=False)
        return linalg.cho_solve(self._rfi_factor, v, check_finite=False)


def build_covariance(dicts: DictionaryPair, p) -> Covariance:
    return Covariance(dicts, p)


def init_state(dicts: DictionaryPair, m_slow: int, xi: float | None = None,
               eta: float = 1.0, keep_x1: bool = False) -> SolverState:
    """Start from unscaled amplitudes 1+j / 1-j (Fourier halves) and 1 (echo).

    Scaled coefficients are those amplitudes times ``eta``. Powers follow
    from the coefficients through the power-update formulas with unit
    weights.
    """
    A1, A2 = dicts.fourier.atoms, dicts.pulse.atoms
    k1, k2 = A1.shape[1], A2.shape[1]
    xi = 0.4 * m_slow if xi is None else xi
    eta = float(eta)
    x1_col = eta * np.where(np.arange(k1) < k1 // 2, 1 + 1j, 1 - 1j)
    x2 = np.full(k2, eta)
    mean_col = np.real(A1 @ x1_col) + A2 @ x2
    fitted = np.repeat(mean_col[:, None], m_slow, axis=1)
    row_power = np.full(k1, 2.0 * m_slow * eta**2)
    p1 = np.sqrt(row_power / xi)
    p2 = np.sqrt(m_slow * x2**2)
    p = np.concatenate([p1, p2])
    x1 = np.repeat(x1_col[:, None], m_slow, axis=1) if keep_x1 else None
    return SolverState(x2_scaled=x2, eta=eta, p=p, w=np.ones(k1 + k2),
                       fitted_mean=fitted, row_power=row_power, x1_scaled=x1)


def compute_surrogate(cpi: SignedCpi, state: SolverState, m: int | None = None) -> np.ndarray:
    """Pseudo-data ``g = z * (gamma - f'(gamma))`` for one PRI or all of them."""
    levels = cpi.schedule.per_pri_levels
    if m is None:
        return kernels.surrogate(cpi.z, state.fitted_mean, levels, state.eta)
    sl = slice(m, m + 1)
    return kernels.surrogate(cpi.z[:, sl], state.fitted_mean[:, sl], levels[sl], state.eta)[:, 0]


def update_weights(kind: str, dicts: DictionaryPair, cov: Covariance, p) -> tuple:
    kind = kind.upper()
    A1, A2 = dicts.fourier.atoms, dicts.pulse.atoms
    k1 = A1.shape[1]
    if kind == "SPICE":
        return np.full(k1, float(A1.shape[0])), np.sum(A2 * A2, axis=0)
    if kind not in KINDS:
        raise ValueError(f"unknown weight rule {kind!r}")
    if cov.paired:
        half = A1[:, : k1 // 2]
        q_half = np.real(np.sum(half.conj() * cov.solve(half), axis=0))
        q1 = np.concatenate([q_half, q_half[::-1]])
    else:
        q1 = np.real(np.sum(A1.conj() * cov.solve(A1), axis=0))
    q2 = np.real(np.sum(A2 * cov.solve(A2.astype(cov.matrix.dtype)), axis=0))
    if kind == "LIKES":
        return q1, q2
    p = np.asarray(p, dtype=float)
    return p[:k1] * q1**2, p[k1:] * q2**2


def _levels_split(schedule: ThresholdSchedule):
    levels = schedule.per_pri_levels
    mean = float(levels.mean())
    return levels, mean, levels - mean


def update_eta(schedule: ThresholdSchedule, G: np.ndarray, cov: Covariance,
               coupling: str = "exact") -> float:
    """Closed-form, non-negative update of the inverse noise scale.

    ``coupling="averaged"`` gives ``max(0, -sum h^T R^-1 g / sum h^T R^-1 h)``,
    the stationary point when every PRI keeps its own echo coefficients.
    ``coupling="exact"`` minimizes the surrogate with the echo shared across
    PRIs: PRI-to-PRI variation is whitened by ``R1 = A1 P1 A1^H + 2I`` and
    the PRI average by the full ``R``.
    """
    levels, lbar, dl = _levels_split(schedule)
    n, m_slow = G.shape
    ones = np.ones(n)
    u = np.real(cov.solve(ones))
    if coupling == "averaged":
        den = float(np.sum(u)) * float(levels @ levels)
        num = float(u @ (G @ levels))
    elif coupling == "exact":
        u1 = np.real(cov.solve_rfi(ones))
        den = float(dl @ dl) * float(np.sum(u1)) + m_slow * lbar**2 * float(np.sum(u))
        num = float(u1 @ (G @ dl)) + m_slow * lbar * float(u @ G.mean(axis=1))
    else:
        raise ValueError(f"unknown coupling {coupling!r}")
    if den <= 0:
        raise ZeroDivisionError("threshold schedule is all zero")
    return max(0.0, -num / den)


def pseudo_data(schedule: ThresholdSchedule, G, eta: float) -> np.ndarray:
    """High-precision surrogate data ``eta * h_m + g_m`` as an N x M array."""
    return G + eta * schedule.per_pri_levels[None, :]


def update_coefficients(schedule: ThresholdSchedule, G, cov: Covariance,
                        dicts: DictionaryPair, p, eta: float, return_blocks: bool = False):
    """Per-PRI LMMSE update ``x_m = P A^H R^-1 (eta h_m + g_m)``.

    Returns ``(X1, x2)`` where ``X1`` is K1 x M (conjugate-paired rows) and
    ``x2`` is the PRI average of the echo blocks. With ``return_blocks`` the
    per-PRI echo blocks (K2 x M) are returned as a third item.
    """
    A1, A2 = dicts.fourier.atoms, dicts.pulse.atoms
    k1 = A1.shape[1]
    p = np.asarray(p, dtype=float)
    W = np.real(cov.solve(pseudo_data(schedule, G, eta)))
    half = A1[:, : k1 // 2]
    X1 = mirror_rows(p[: k1 // 2, None] * (half.conj().T @ W))
    blocks = p[k1:, None] * (A2.T @ W)
    x2 = blocks.mean(axis=1)
    if return_blocks:
        return X1, x2, blocks
    return X1, x2


def refit_rfi(schedule: ThresholdSchedule, G, cov: Covariance, dicts: DictionaryPair,
              p, eta: float, x2) -> np.ndarray:
    """RFI coefficients given the shared echo: ``P1 A1^H R1^-1 (d_m - A2 x2)``."""
    A1, A2 = dicts.fourier.atoms, dicts.pulse.atoms
    k1 = A1.shape[1]
    resid = pseudo_data(schedule, G, eta) - (A2 @ x2)[:, None]
    V = np.real(cov.solve_rfi(resid))
    half = A1[:, : k1 // 2]
    return mirror_rows(np.asarray(p)[: k1 // 2, None] * (half.conj().T @ V))


def coupled_update(schedule: ThresholdSchedule, G, cov: Covariance, dicts: DictionaryPair,
                   p, eta: float, coupling: str = "exact", pri_block: int = 512):
    """Coefficient step reduced to the aggregates the loop needs.

    Returns ``(row_power, x2, fitted_mean)`` where ``row_power[k]`` is
    ``sum_m |x1[k, m]|^2``; the K1 x M coefficient array is never formed.
    ``coupling="averaged"`` keeps each PRI's own LMMSE Fourier coefficients
    next to the averaged echo; ``"exact"`` refits them against the averaged
    echo so the step is the constrained minimizer of the surrogate.
    """
    A1, A2 = dicts.fourier.atoms, dicts.pulse.atoms
    k1 = A1.shape[1]
    p = np.asarray(p, dtype=float)
    D = pseudo_data(schedule, G, eta)
    x2 = p[k1:] * (A2.T @ np.real(cov.solve(D.mean(axis=1))))
    if coupling == "averaged":
        V = np.real(cov.solve(D))
    elif coupling == "exact":
        V = np.real(cov.solve_rfi(D - (A2 @ x2)[:, None]))
    else:
        raise ValueError(f"unknown coupling {coupling!r}")
    half_h = A1[:, : k1 // 2].conj().T
    row_half = np.zeros(k1 // 2)
    for start in range(0, V.shape[1], pri_block):
        proj = half_h @ V[:, start:start + pri_block]
        row_half += np.sum(proj.real**2 + proj.imag**2, axis=1)
    row_power = np.concatenate([row_half, row_half[::-1]]) * p[:k1] ** 2
    fitted = np.real(cov.rfi) @ V + (A2 @ x2)[:, None]
    return row_power, x2, fitted


def update_powers(row_power, x2, w1, w2, xi: float, m_slow: int):
    """``p1 = sqrt(row_power / (xi w1))``, ``p2 = sqrt(M x2^2 / w2)``; 0/0 -> 0."""
    row_power = np.asarray(row_power, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    num1 = np.maximum(row_power, 0.0)
    num2 = m_slow * x2**2
    return _balanced(num1, xi * np.asarray(w1, dtype=float)), _balanced(num2, np.asarray(w2, dtype=float))


def _balanced(num, den):
    bad = (den <= 0) & (num > 0)
    if np.any(bad):
        raise ValueError(f"{int(bad.sum())} atoms have zero weight but nonzero coefficients")
    out = np.zeros_like(num)
    ok = num > 0
    out[ok] = np.sqrt(num[ok] / den[ok])
    return out


def _quad_over_p(num, p):
    out = np.zeros_like(num)
    ok = num > 0
    if np.any(ok & (p <= 0)):
        return np.inf
    out[ok] = num[ok] / p[ok]
    return float(np.sum(out))


def penalized_objective(cpi: SignedCpi, state: SolverState, xi: float) -> float:
    """Probit NLL plus the SPICE-type quadratic and linear power penalties."""
    k1 = state.row_power.shape[0]
    p1, p2 = state.split_p(k1)
    w1, w2 = state.split_w(k1)
    m_slow = cpi.z.shape[1]
    val = kernels.nll(cpi.z, state.fitted_mean, cpi.schedule.per_pri_levels, state.eta)
    val += _quad_over_p(state.row_power, p1)
    val += _quad_over_p(m_slow * state.x2_scaled**2, p2)
    val += xi * float(w1 @ p1) + float(w2 @ p2)
    return float(val)


def objective(cpi: SignedCpi, state: SolverState, xi: float) -> float:
    return penalized_objective(cpi, state, xi)


def surrogate_fit(cpi: SignedCpi, mean, eta: float, G) -> float:
    """Quadratic data term ``0.5 * sum_m ||mean_m - eta h_m - g_m||^2`` of the majorizer."""
    resid = mean - eta * cpi.schedule.per_pri_levels[None, :] - G
    return 0.5 * float(np.sum(resid * resid))


def mm_iteration(cpi: SignedCpi, dicts: DictionaryPair, state: SolverState,
                 kind: str, xi: float, pri_block: int = 512,
                 coupling: str = "exact") -> SolverState:
    """Steps 2-6: covariance and surrogate, weights, eta, coefficients, powers."""
    m_slow = cpi.z.shape[1]
    cov = build_covariance(dicts, state.p)
    G = compute_surrogate(cpi, state)
    w1, w2 = update_weights(kind, dicts, cov, state.p)
    eta = update_eta(cpi.schedule, G, cov, coupling)
    row_power, x2, fitted = coupled_update(cpi.schedule, G, cov, dicts, state.p, eta,
                                           coupling, pri_block)
    p1, p2 = update_powers(row_power, x2, w1, w2, xi, m_slow)
    return SolverState(x2_scaled=x2, eta=eta, p=np.concatenate([p1, p2]),
                       w=np.concatenate([w1, w2]), fitted_mean=fitted,
                       row_power=row_power, iter=state.iter + 1)


def probit_scale_init(cpi: SignedCpi) -> float:
    """Starting ``eta`` from a zero-mean Gaussian fit to the sign counts.

    Models every sample as N(0, s^2) and maximizes the probit likelihood of
    the per-PRI +1 counts over ``s``; returns ``1/s``. Cheap, and puts the
    first iterate at the right order of magnitude, unlike ``eta = 1``.
    """
    z = cpi.z
    levels = cpi.schedule.per_pri_levels
    n = z.shape[0]
    k = np.count_nonzero(z > 0, axis=0)
    ref = float(np.max(np.abs(levels)))
    if ref == 0:
        return 1.0

    def nll(log_s):
        u = levels / np.exp(log_s)
        return -float(np.sum(k * log_ndtr(-u) + (n - k) * log_ndtr(u)))

    lo, hi = np.log(ref) - 10.0, np.log(ref) + 10.0
    res = minimize_scalar(nll, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-6})
    return float(np.exp(-res.x))


def _initial_eta(cpi: SignedCpi, opts: SolverOptions) -> float:
    if opts.eta_init == "probit":
        return probit_scale_init(cpi)
    if opts.eta_init == "unit":
        return 1.0
    return float(opts.eta_init)


def solve(cpi: SignedCpi, dicts: DictionaryPair, opts: SolverOptions | None = None,
          callback: Callable[[SolverState, float], None] | None = None) -> RecoveryResult:
    """Run the MM loop until the relative power change falls below ``tol``.

    ``callback(state, p_change)`` is invoked after every iteration.
    """
    opts = SolverOptions() if opts is None else opts
    m_slow = cpi.z.shape[1]
    if dicts.n_fast != cpi.z.shape[0]:
        raise ValueError("dictionaries do not match the fast-time length of z")
    xi = opts.xi_for(m_slow)
    state = init_state(dicts, m_slow, xi, eta=_initial_eta(cpi, opts))
    trace = []
    changes = []
    converged = False
    for _ in range(opts.max_iter):
        new = mm_iteration(cpi, dicts, state, opts.kind, xi, opts.pri_block, opts.coupling)
        change = float(np.linalg.norm(new.p - state.p) / np.linalg.norm(state.p))
        state = new
        trace.append(penalized_objective(cpi, state, xi))
        changes.append(change)
        if callback is not None:
            callback(state, change)
        if not np.any(state.p > 0):
            break
        if change < opts.tol:
            converged = True
            break

    k1 = dicts.fourier.k1
    diagnostic = ""
    if state.eta > 0:
        x2_hat = state.x2_scaled / state.eta
    else:
        diagnostic = "eta estimate is zero; echo scale is unrecoverable"
        log.warning(diagnostic)
        x2_hat = np.zeros_like(state.x2_scaled)
    s_hat = dicts.pulse.atoms @ x2_hat
    return RecoveryResult(s_hat=s_hat, x2_hat=x2_hat, eta_hat=float(state.eta),
                          rfi_power=state.p[:k1].copy(), iterations=state.iter,
                          converged=converged, objective_trace=np.asarray(trace),
                          p_change_trace=np.asarray(changes), diagnostic=diagnostic)


def with_weights(state: SolverState, w) -> SolverState:
    return replace(state, w=np.asarray(w, dtype=float))
