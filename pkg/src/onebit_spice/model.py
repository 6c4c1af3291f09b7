"""Measurement model for CTBV one-bit radar.

Threshold schedules, the sign quantizer and the two dictionaries (Fourier
atoms for RFI, shifted pulses for the echo) that make up the linear model
inside the likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .scene import PulseWaveform


@dataclass(frozen=True)
class CpiConfig:
    """Geometry of one coherent processing interval.

    Parameters
    ----------
    n_fast : int
        Fast-time samples per PRI (N).
    m_slow : int
        PRIs per CPI (M), at least 2.
    fs_hz : float
        Fast-time sampling rate in Hz.
    h_max : float
        Threshold half-range in amplitude units.
    """

    n_fast: int
    m_slow: int
    fs_hz: float = 8e9
    h_max: float = 400.0

    def __post_init__(self):
        if int(self.n_fast) != self.n_fast or self.n_fast < 1:
            raise ValueError(f"n_fast must be a positive integer, got {self.n_fast}")
        if int(self.m_slow) != self.m_slow or self.m_slow < 2:
            raise ValueError(f"m_slow must be an integer >= 2, got {self.m_slow}")
        if not self.fs_hz > 0:
            raise ValueError("fs_hz must be positive")
        if not self.h_max > 0:
            raise ValueError("h_max must be positive")

    @property
    def dt(self) -> float:
        return 1.0 / self.fs_hz


@dataclass(frozen=True)
class ThresholdSchedule:
    """Linear slow-time threshold ramp.

    ``per_pri_levels[m]`` is applied to every fast-time sample of PRI ``m``;
    the full N x M threshold matrix is rank one and never materialized except
    through :meth:`as_matrix`.
    """

    per_pri_levels: np.ndarray
    delta_h: float

    @property
    def h_max(self) -> float:
        return float(self.per_pri_levels[-1])

    @property
    def m_slow(self) -> int:
        return self.per_pri_levels.shape[0]

    def as_matrix(self, n_fast: int) -> np.ndarray:
        return np.broadcast_to(self.per_pri_levels, (n_fast, self.m_slow)).copy()


@dataclass(frozen=True)
class SignedCpi:
    """One-bit measurements ``z`` (entries +-1) and the schedule that produced them."""

    z: np.ndarray
    schedule: ThresholdSchedule
    config: CpiConfig

    def __post_init__(self):
        if self.z.shape != (self.config.n_fast, self.config.m_slow):
            raise ValueError(
                f"z has shape {self.z.shape}, expected "
                f"{(self.config.n_fast, self.config.m_slow)}"
            )
        if not np.all(np.abs(self.z) == 1):
            raise ValueError("z entries must be exactly -1 or +1")


@dataclass(frozen=True)
class FourierDictionary:
    atoms: np.ndarray  # N x K1 complex
    omega_grid: np.ndarray  # K1, symmetric about zero

    @property
    def k1(self) -> int:
        return self.omega_grid.shape[0]

    @property
    def conj_pairing(self) -> np.ndarray:
        """Index of the conjugate partner of each atom (0-based)."""
        return np.arange(self.k1)[::-1]


@dataclass(frozen=True)
class PulseDictionary:
    atoms: np.ndarray  # N x K2 real
    delay_grid: np.ndarray  # delays in samples
    pulse_meta: dict = field(default_factory=dict)

    @property
    def k2(self) -> int:
        return self.delay_grid.shape[0]


@dataclass(frozen=True)
class DictionaryPair:
    fourier: FourierDictionary
    pulse: PulseDictionary

    @property
    def n_fast(self) -> int:
        return self.fourier.atoms.shape[0]


def build_threshold_schedule(config: CpiConfig) -> ThresholdSchedule:
    m = config.m_slow
    if m < 2:
        raise ValueError("threshold ramp needs at least two PRIs")
    delta_h = 2.0 * config.h_max / (m - 1)
    levels = -config.h_max + delta_h * np.arange(m)
    # pin the endpoints so they are exact regardless of rounding in the ramp
    levels[0] = -config.h_max
    levels[-1] = config.h_max
    levels.setflags(write=False)
    return ThresholdSchedule(per_pri_levels=levels, delta_h=delta_h)


def sign(x: np.ndarray) -> np.ndarray:
    """Elementwise sign with sign(0) = +1."""
    return np.where(x >= 0, 1.0, -1.0)


def quantize_ctbv(y: np.ndarray, schedule: ThresholdSchedule,
                  config: CpiConfig | None = None) -> SignedCpi:
    """Compare each PRI of ``y`` against its threshold level."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 2 or y.shape[1] != schedule.m_slow:
        raise ValueError(
            f"y has shape {y.shape}, schedule expects {schedule.m_slow} PRIs"
        )
    if config is None:
        config = CpiConfig(n_fast=y.shape[0], m_slow=y.shape[1],
                           h_max=schedule.h_max)
    elif config.n_fast != y.shape[0] or config.m_slow != y.shape[1]:
        raise ValueError("y dimensions do not match config")
    z = sign(y - schedule.per_pri_levels[None, :])
    return SignedCpi(z=z, schedule=schedule, config=config)


def fourier_grid(k1: int) -> np.ndarray:
    return -np.pi + np.pi * (2 * np.arange(1, k1 + 1) - 1) / k1


def build_fourier_dictionary(n_fast: int, k1: int) -> FourierDictionary:
    """Fourier atoms on the endpoint-free grid ``-pi + pi(2k-1)/K1``.

    The grid is symmetric about zero, so atom ``k`` and atom ``K1-1-k``
    (0-based) are elementwise conjugates.
    """
    if k1 < 2 or k1 % 2:
        raise ValueError(f"K1 must be an even integer >= 2, got {k1}")
    omega = fourier_grid(k1)
    # exact mirror so pairing holds bit-for-bit
    omega[k1 // 2:] = -omega[: k1 // 2][::-1]
    n = np.arange(n_fast)[:, None]
    atoms = np.exp(1j * n * omega[None, :])
    atoms[:, k1 // 2:] = atoms[:, : k1 // 2][:, ::-1].conj()
    return FourierDictionary(atoms=atoms, omega_grid=omega)


def build_pulse_dictionary(pulse: PulseWaveform, config: CpiConfig, k2: int,
                           drop_empty: bool = True) -> PulseDictionary:
    """Shifted copies of ``pulse`` on a grid of ``k2`` delays.

    Atom ``k`` (1-based) is the pulse evaluated at ``t_n - (N dt / K2) k``.
    Atoms that fall entirely outside the window are dropped when
    ``drop_empty`` is set, otherwise a ValueError is raised.
    """
    if k2 < 1:
        raise ValueError("K2 must be >= 1")
    n_fast = config.n_fast
    dt = config.dt
    t = np.arange(n_fast) * dt
    delays = n_fast * np.arange(1, k2 + 1) / k2  # in samples
    atoms = pulse(t[:, None] - delays[None, :] * dt)
    energy = np.sum(atoms**2, axis=0)
    empty = energy <= 0
    if np.any(empty):
        if not drop_empty:
            raise ValueError(f"{int(empty.sum())} pulse atoms have zero energy in the window")
        atoms = atoms[:, ~empty]
        delays = delays[~empty]
        if delays.size == 0:
            raise ValueError("no pulse atom has energy in the window")
    meta = {"kind": pulse.kind, "width_s": pulse.width_s,
            "amplitude": pulse.amplitude, "center_s": pulse.center_s}
    return PulseDictionary(atoms=np.ascontiguousarray(atoms), delay_grid=delays,
                           pulse_meta=meta)


def build_dictionaries(pulse: PulseWaveform, config: CpiConfig,
                       k1: int | None = None, k2: int | None = None) -> DictionaryPair:
    """Both dictionaries with the default 4N grids."""
    k1 = 4 * config.n_fast if k1 is None else k1
    k2 = 4 * config.n_fast if k2 is None else k2
    return DictionaryPair(build_fourier_dictionary(config.n_fast, k1),
                          build_pulse_dictionary(pulse, config, k2))
