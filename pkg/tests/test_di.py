import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onebit_spice.di import recover_di
from onebit_spice.model import CpiConfig, SignedCpi, build_threshold_schedule, quantize_ctbv


def di_oracle(y_col, levels, h_max, dh):
    """Count the crossings one comparison at a time."""
    count = sum(1 for lv in levels if y_col >= lv)
    return dh * count - h_max - dh


def static_cpi(values, m, h_max):
    cfg = CpiConfig(len(values), m, h_max=h_max)
    sched = build_threshold_schedule(cfg)
    y = np.tile(np.asarray(values, dtype=float)[:, None], (1, m))
    return quantize_ctbv(y, sched, cfg), sched


def test_saturation():
    cfg = CpiConfig(2, 7, h_max=3.0)
    sched = build_threshold_schedule(cfg)
    z = np.array([[1.0] * 7, [-1.0] * 7])
    s = recover_di(SignedCpi(z, sched, cfg))
    assert s[0] == pytest.approx(3.0, abs=1e-12)
    assert s[1] == pytest.approx(-3.0 - sched.delta_h, abs=1e-12)


def test_hand_example():
    cpi, _ = static_cpi([0.4], 5, 2.0)
    np.testing.assert_array_equal(cpi.z[0], [1, 1, 1, -1, -1])
    assert recover_di(cpi)[0] == 0.0


def test_matches_oracle(rng):
    cfg = CpiConfig(9, 40, h_max=1.5)
    sched = build_threshold_schedule(cfg)
    y = rng.uniform(-2, 2, (9, 40))
    s = recover_di(quantize_ctbv(y, sched, cfg))
    # DI only sees counts, so a row of y is scored against every level
    for n in range(9):
        count = np.sum(y[n] >= sched.per_pri_levels)
        assert s[n] == pytest.approx(sched.delta_h * count - 1.5 - sched.delta_h, abs=1e-12)


def test_bound_on_grid():
    h_max, m = 2.0, 33
    cfg = CpiConfig(16, m, h_max=h_max)
    dh = build_threshold_schedule(cfg).delta_h
    grid = np.linspace(-h_max + dh, h_max - dh, 101)
    for start in range(0, 101, 16):
        vals = grid[start:start + 16]
        vals = np.pad(vals, (0, 16 - vals.size), constant_values=0.0)
        cpi, sched = static_cpi(vals, m, h_max)
        s = recover_di(cpi)
        assert np.all(np.abs(s - vals) <= dh)
        for n, v in enumerate(vals):
            assert s[n] == pytest.approx(di_oracle(v, sched.per_pri_levels, h_max, dh), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(-5.0, 5.0), st.floats(0.0, 3.0))
def test_monotone_and_range(y0, step):
    cpi_a, sched = static_cpi([y0], 17, 2.0)
    cpi_b, _ = static_cpi([y0 + step], 17, 2.0)
    a, b = recover_di(cpi_a)[0], recover_di(cpi_b)[0]
    assert b >= a
    for v in (a, b):
        assert -2.0 - sched.delta_h - 1e-12 <= v <= 2.0 + 1e-12


def test_backends_agree(backend):
    z = np.where(np.random.default_rng(0).uniform(size=(12, 50)) < 0.3, -1.0, 1.0)
    np.testing.assert_array_equal(backend.positive_counts(z), np.sum(z > 0, axis=1))
