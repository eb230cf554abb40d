import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import signal as sps

from phasedbs.circstats import circular_stats, wrap_deg
from phasedbs.errors import DataError
from phasedbs.fir import THETA
from phasedbs.oracle import (
    analytic_signal, butter_bandpass, fft, ifft, next_pow2, oracle_ground_truth, zero_phase_bandpass,
)


@given(st.integers(0, 10), st.integers(0, 1000))
def test_fft_matches_numpy(log_n, seed):
    x = np.random.default_rng(seed).standard_normal(1 << log_n)
    assert np.allclose(fft(x), np.fft.fft(x), atol=1e-9 * (1 << log_n))
    assert np.allclose(ifft(fft(x)).real, x, atol=1e-9)


def test_fft_rejects_non_power_of_two():
    with pytest.raises(ValueError):
        fft(np.zeros(12))
    assert next_pow2(1000) == 1024 and next_pow2(1024) == 1024


def test_analytic_signal_of_cosine():
    t = np.arange(4096)
    z = analytic_signal(np.cos(2 * np.pi * 64 * t / 4096))
    assert np.allclose(z.imag, np.sin(2 * np.pi * 64 * t / 4096), atol=1e-9)


def test_ground_truth_ramp_slope():
    rate = 4000.0
    t = np.arange(int(20 * rate)) / rate
    phi = oracle_ground_truth(np.sin(2 * np.pi * 6 * t), THETA, rate)
    core = slice(int(2 * rate), int(18 * rate))
    slope = np.polyfit(t[core], np.unwrap(phi[core]), 1)[0]
    assert slope == pytest.approx(2 * np.pi * 6, rel=1e-3)
    assert phi.min() >= -np.pi and phi.max() < np.pi


def test_zero_phase_symmetry():
    # edge initial conditions differ between the two orders; compare away from them
    x = np.random.default_rng(1).standard_normal(40 * 4000)
    a = zero_phase_bandpass(x, THETA, 4000.0)
    b = zero_phase_bandpass(x[::-1], THETA, 4000.0)[::-1]
    core = slice(5 * 4000, 35 * 4000)
    assert np.allclose(a[core], b[core], atol=1e-10)


def test_band_edges_half_power():
    sos = butter_bandpass(THETA, 4000.0)
    _, h = sps.sosfreqz(sos, worN=[4.0, 8.0], fs=4000.0)
    assert np.allclose(np.abs(h) ** 2, 0.5, rtol=0.02)


def test_short_trace_rejected():
    with pytest.raises(DataError):
        oracle_ground_truth(np.zeros(1000), THETA)


def test_circular_stats():
    s = circular_stats([10.0, 10.0, 10.0])
    assert s.circular_mean_deg == pytest.approx(10.0)
    assert s.circular_resultant_r == pytest.approx(1.0)
    assert sum(s.histogram) == 3 and len(s.histogram) == 36
    u = circular_stats(np.arange(-180, 180, 10.0))
    assert u.circular_resultant_r < 1e-12
    assert circular_stats([]).n == 0
    assert wrap_deg(190.0) == -170.0 and wrap_deg(-180.0) == -180.0
    assert circular_stats([179.0, -179.0]).circular_mean_deg == pytest.approx(-180.0, abs=1e-9) or \
        circular_stats([179.0, -179.0]).circular_mean_deg == pytest.approx(180.0, abs=1e-9)
