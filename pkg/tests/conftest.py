import numpy as np
import pytest

from onebit_spice.kernels import available_backends
from onebit_spice.model import (CpiConfig, DictionaryPair, build_fourier_dictionary,
                                build_pulse_dictionary, build_threshold_schedule,
                                quantize_ctbv)
from onebit_spice.scene import PulseWaveform

BACKENDS = sorted(available_backends())


@pytest.fixture(params=BACKENDS)
def backend(request):
    """Kernel implementation module, one per importable backend."""
    return available_backends()[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def small_problem(n=8, m=16, k1=None, k2=None, seed=0, h_max=2.0, fs_hz=8e9):
    """Random small one-bit problem: (cpi, dicts, y) with a short pulse."""
    r = np.random.default_rng(seed)
    cfg = CpiConfig(n, m, fs_hz=fs_hz, h_max=h_max)
    pulse = PulseWaveform(width_s=1.2 / fs_hz)
    dicts = DictionaryPair(build_fourier_dictionary(n, k1 or 4 * n),
                           build_pulse_dictionary(pulse, cfg, k2 or 4 * n))
    y = r.standard_normal((n, m)) * h_max * 0.7
    cpi = quantize_ctbv(y, build_threshold_schedule(cfg), cfg)
    return cpi, dicts, y


def random_paired_powers(dicts, r, scale=1.0, sparsity=0.3):
    """Powers with p1 symmetric under the conjugate pairing and some zeros."""
    k1, k2 = dicts.fourier.k1, dicts.pulse.k2
    half = r.uniform(0.1, 1.0, k1 // 2) * scale * (r.uniform(size=k1 // 2) > sparsity)
    p1 = np.concatenate([half, half[::-1]])
    p2 = r.uniform(0.1, 1.0, k2) * scale * (r.uniform(size=k2) > sparsity)
    return np.concatenate([p1, p2])


ACCEPTANCE = {}


def report_criterion(key, ok, detail):
    """Record one acceptance line; printed again in the terminal summary."""
    line = f"criterion {key}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE[key] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE, key=str):
            terminalreporter.write_line(ACCEPTANCE[key])
