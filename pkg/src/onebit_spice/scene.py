"""Ground-truth scene synthesis: pulse, sparse echoes, sinusoidal RFI, noise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .model import CpiConfig

# default simulated RFI: (frequency Hz, amplitude ratio) per tone
DEFAULT_RFI_TONES = (
    (500e6, 1.0),
    (350e6, 0.95),
    (700e6, 0.8),
    (900e6, 0.87),
    (1050e6, 0.9),
)


@dataclass(frozen=True)
class PulseWaveform:
    """First derivative of a Gaussian, scaled so its peak magnitude is ``amplitude``.

    psi(t) = -amplitude * u * exp((1 - u^2) / 2),  u = (t - center_s) / width_s
    """

    width_s: float
    amplitude: float = 1.0
    center_s: float = 0.0
    kind: str = "gaussian_first_derivative"

    def __post_init__(self):
        if self.kind != "gaussian_first_derivative":
            raise ValueError(f"unsupported pulse kind {self.kind!r}")
        if not self.width_s > 0:
            raise ValueError("width_s must be positive")

    def __call__(self, t):
        u = (np.asarray(t, dtype=float) - self.center_s) / self.width_s
        return -self.amplitude * u * np.exp(0.5 * (1.0 - u * u))

    @property
    def peak_frequency_hz(self) -> float:
        return 1.0 / (2.0 * math.pi * self.width_s)

    def spectrum_magnitude(self, f_hz):
        """Analytic |Psi(f)| normalized to 1 at the peak frequency."""
        v = 2.0 * math.pi * np.abs(np.asarray(f_hz, dtype=float)) * self.width_s
        return v * np.exp(0.5 * (1.0 - v * v))

    def band_edges_hz(self, level_db: float = -3.0) -> tuple[float, float]:
        lo, hi = _band_edges_normalized(level_db)
        scale = 1.0 / (2.0 * math.pi * self.width_s)
        return lo * scale, hi * scale


def _band_edges_normalized(level_db: float) -> tuple[float, float]:
    # solve v exp((1 - v^2)/2) = 10^(level_db/20) on both sides of v = 1
    if not level_db < 0:
        raise ValueError("band level must be negative (dB below peak)")
    target = math.log(10.0 ** (level_db / 20.0))

    def g(v):
        return math.log(v) + 0.5 * (1.0 - v * v) - target

    lo = brentq(g, 1e-300, 1.0, xtol=1e-300, rtol=1e-15)
    hi = brentq(g, 1.0, 1e3, rtol=1e-15)
    return lo, hi


def synth_pulse_band(fs_hz: float, f_low_hz: float, f_high_hz: float,
                     level_db: float = -3.0, amplitude: float = 1.0,
                     tolerance: float = 0.20) -> PulseWaveform:
    """Gaussian-derivative pulse whose ``level_db`` band best matches ``[f_low, f_high]``.

    The edge ratio of this pulse family is fixed by ``level_db``, so the width
    is chosen to balance the two relative endpoint errors (geometric mean).
    Raises ValueError when the worse endpoint misses by more than ``tolerance``.
    """
    if not 0 < f_low_hz < f_high_hz < fs_hz / 2:
        raise ValueError("need 0 < f_low < f_high < fs/2")
    v_lo, v_hi = _band_edges_normalized(level_db)
    width = math.sqrt(v_lo * v_hi / (f_low_hz * f_high_hz)) / (2.0 * math.pi)
    pulse = PulseWaveform(width_s=width, amplitude=amplitude)
    lo, hi = pulse.band_edges_hz(level_db)
    err = max(abs(lo / f_low_hz - 1.0), abs(hi / f_high_hz - 1.0))
    if err > tolerance:
        raise ValueError(
            f"a Gaussian-derivative pulse cannot cover {f_low_hz:.4g}-{f_high_hz:.4g} Hz "
            f"at {level_db} dB (best endpoint error {err:.1%})"
        )
    return pulse


@dataclass(frozen=True)
class SceneSpec:
    """Targets, RFI tones and noise for one synthetic CPI.

    ``targets`` holds (delay in samples, amplitude) pairs; ``rfi_tones`` holds
    (frequency Hz, amplitude ratio relative to the first tone).
    """

    targets: tuple = ()
    rfi_tones: tuple = DEFAULT_RFI_TONES
    base_rfi_amplitude: float = 1.0
    noise_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(tuple(map(float, t)) for t in self.targets))
        object.__setattr__(self, "rfi_tones", tuple(tuple(map(float, t)) for t in self.rfi_tones))
        if self.rfi_tones and self.rfi_tones[0][1] != 1.0:
            raise ValueError("first RFI tone must have amplitude ratio 1")
        for delay, amp in self.targets:
            if delay < 0:
                raise ValueError("target delays must be non-negative")
            if amp == 0:
                raise ValueError("target amplitudes must be nonzero")
        if self.base_rfi_amplitude <= 0:
            raise ValueError("base_rfi_amplitude must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")

    def check_window(self, n_fast: int):
        for delay, _ in self.targets:
            if delay > n_fast - 1:
                raise ValueError(f"target delay {delay} outside [0, {n_fast - 1}]")


def default_targets(n_fast: int) -> tuple:
    """Six targets spread over the window with mixed signs and magnitudes."""
    frac = np.array([0.14, 0.27, 0.41, 0.55, 0.70, 0.84])
    delays = np.round(frac * n_fast * 4) / 4  # quarter-sample positions
    amps = (120.0, -80.0, 100.0, 60.0, -90.0, 70.0)
    return tuple(zip(delays.tolist(), amps))


def synth_echo(scene: SceneSpec, pulse: PulseWaveform, config: CpiConfig) -> np.ndarray:
    """Echo for one PRI by analytic evaluation of the pulse at each target delay."""
    scene.check_window(config.n_fast)
    t = np.arange(config.n_fast) * config.dt
    s = np.zeros(config.n_fast)
    for delay, amp in scene.targets:
        s += amp * pulse(t - delay * config.dt)
    return s


def rfi_phases(scene: SceneSpec, m_slow: int, rng=None) -> np.ndarray:
    rng = np.random.default_rng(scene.seed) if rng is None else rng
    return rng.uniform(0.0, 2.0 * np.pi, size=(len(scene.rfi_tones), m_slow))


def synth_rfi(scene: SceneSpec, config: CpiConfig, rng=None,
              phases: np.ndarray | None = None) -> np.ndarray:
    """Sum of sinusoids with fixed amplitudes/frequencies and per-PRI random phases."""
    n = np.arange(config.n_fast)[:, None]
    f = np.zeros((config.n_fast, config.m_slow))
    if not scene.rfi_tones:
        return f
    for freq, _ in scene.rfi_tones:
        if not 0 < freq < config.fs_hz / 2:
            raise ValueError(f"RFI tone {freq} Hz must lie strictly inside (0, fs/2)")
    if phases is None:
        phases = rfi_phases(scene, config.m_slow, rng)
    for q, (freq, ratio) in enumerate(scene.rfi_tones):
        omega = 2.0 * np.pi * freq / config.fs_hz
        f += scene.base_rfi_amplitude * ratio * np.sin(omega * n + phases[q][None, :])
    return f


def synth_noise(scene: SceneSpec, config: CpiConfig, rng) -> np.ndarray:
    return scene.noise_sigma * rng.standard_normal((config.n_fast, config.m_slow))


def scale_to_levels(s: np.ndarray, f: np.ndarray, e: np.ndarray | None,
                    target_sinr_db: float, target_inr_db: float | None = None):
    """Mix echo, RFI and noise at the requested SINR (and INR).

    Noise is first rescaled against the RFI to hit ``target_inr_db``; then RFI
    and noise are scaled together to hit ``target_sinr_db``. The echo ``s`` is
    replicated across all PRIs. Returns ``(y, (sinr_db, inr_db))``.
    """
    s = np.asarray(s, dtype=float)
    f = np.asarray(f, dtype=float)
    S = np.broadcast_to(s[:, None], f.shape)
    norm_s = np.linalg.norm(S)
    if norm_s == 0:
        raise ValueError("echo is zero; SINR undefined")
    norm_f = np.linalg.norm(f)
    if norm_f == 0:
        raise ValueError("RFI is zero; cannot scale to SINR")

    if e is not None:
        e = np.asarray(e, dtype=float)
        if e.shape != f.shape:
            raise ValueError("noise and RFI shapes differ")
        norm_e = np.linalg.norm(e)
        if target_inr_db is not None:
            if norm_e == 0:
                raise ValueError("zero noise cannot reach a finite INR")
            e = e * (norm_f / norm_e) / 10.0 ** (target_inr_db / 20.0)
        interference = f + e
    else:
        if target_inr_db is not None:
            raise ValueError("zero noise cannot reach a finite INR")
        interference = f

    alpha = norm_s / (np.linalg.norm(interference) * 10.0 ** (target_sinr_db / 20.0))
    y = S + alpha * f
    if e is not None:
        y = y + alpha * e
    # imported lazily to keep the module graph acyclic
    from .metrics import inr_db, sinr_db
    achieved_sinr = sinr_db(S, alpha * f, alpha * e if e is not None else None)
    achieved_inr = inr_db(alpha * f, alpha * e) if e is not None else None
    return y, (achieved_sinr, achieved_inr)
