import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import signal as sps

from phasedbs.errors import ConfigError, DataError
from phasedbs.signals import (
    BlankingSchedule, CoupledParams, FrontendConfig, afe_digitize, channel_gains, count_clipped,
    frames, gen_coupled_pair, gen_sine_pink, pink_noise,
)


def test_pure_sine_peak():
    x = gen_sine_pink(2e-3, 6.0, 0.0, 1.0)
    assert x.max() == pytest.approx(1e-3, rel=1e-6)
    assert x.size == 4000


def test_pink_rms_and_determinism():
    a = gen_sine_pink(0.0, 6.0, 1e-3, 10.0, seed=4)
    b = gen_sine_pink(0.0, 6.0, 1e-3, 10.0, seed=4)
    assert a.tobytes() == b.tobytes()
    assert a.std() == pytest.approx(1e-3, rel=0.05)
    assert not np.array_equal(a, gen_sine_pink(0.0, 6.0, 1e-3, 10.0, seed=5))


def test_pink_slope():
    x = pink_noise(60 * 4000, 4000.0, 1.0, np.random.default_rng(0))
    f, p = sps.welch(x, fs=4000.0, nperseg=1 << 15)
    band = (f >= 1) & (f <= 100)
    slope = np.polyfit(np.log10(f[band]), 10 * np.log10(p[band]), 1)[0]
    assert slope == pytest.approx(-10.0, abs=1.5)


def test_generator_errors():
    with pytest.raises(ConfigError):
        gen_sine_pink(1e-3, 6.0, 0.0, 0.0)
    with pytest.raises(ConfigError):
        gen_sine_pink(1e-3, 2000.0, 0.0, 1.0)
    with pytest.raises(ConfigError):
        gen_coupled_pair("chaotic")


def test_coupled_pairs():
    p = CoupledParams(duration_s=2.0)
    for kind in ("plv-locked", "pac-coupled", "independent"):
        a = gen_coupled_pair(kind, p, seed=3)
        assert a.shape == (2, 8000)
        assert a.tobytes() == gen_coupled_pair(kind, p, seed=3).tobytes()
    locked = gen_coupled_pair("plv-locked", p, seed=3)
    assert np.allclose(locked[0], locked[1])


def test_zero_input_and_peak_code():
    fe = FrontendConfig()
    assert not afe_digitize(np.zeros((16, 100)), fe).any()
    codes = afe_digitize([gen_sine_pink(2e-3, 6.0, 0.0, 1.0)], fe)
    assert codes.shape == (4000, 16)
    assert codes[:, 0].max() == round(1e-3 * 10 ** (53 / 20) / (1.2 / 1024)) == 381
    assert not codes[:, 1:].any()


def test_blanking_forces_zero():
    sched = BlankingSchedule([(10, 5), (100, 40)])
    codes = afe_digitize([np.full(400, 0.5e-3)] * 16, FrontendConfig(), sched)
    m = sched.mask(400)
    assert not codes[m].any()
    assert codes[~m].all()


@given(st.floats(-5e-4, 5e-4), st.floats(1e-7, 1e-5))
def test_quantisation_error_half_lsb(start, step):
    fe = FrontendConfig()
    v = start + step * np.arange(200)
    codes = afe_digitize([v], fe)[:, 0]
    ideal = fe.gain_linear * v / fe.lsb_v
    inside = (codes > fe.code_min) & (codes < fe.code_max)
    assert np.all(np.abs(codes - ideal)[inside] <= 0.5 + 1e-9)


def test_gain_mismatch_spread():
    fe = FrontendConfig(mismatch_sigma_rel=0.001, seed=7)
    tone = gen_sine_pink(2e-3, 6.0, 0.0, 2.0)
    codes = afe_digitize([tone] * 16, fe)
    gains = [np.dot(codes[:, c], tone) / np.dot(tone, tone) for c in range(16)]
    assert np.std(gains) / np.mean(gains) < 0.002
    assert np.array_equal(channel_gains(fe), channel_gains(fe))


def test_clipping_and_errors():
    fe = FrontendConfig()
    codes = afe_digitize([np.full(10, 1.0)], fe)
    assert codes[:, 0].max() == 511 and count_clipped(codes, fe) == 10
    with pytest.raises(DataError):
        afe_digitize([np.zeros(5), np.zeros(6)], fe)
    with pytest.raises(DataError):
        afe_digitize(np.zeros((17, 5)), fe)
    with pytest.raises(ConfigError):
        FrontendConfig(gain_db=40.0)
    with pytest.raises(ConfigError):
        FrontendConfig(scan_order=(0, 0))


def test_blanking_schedule():
    with pytest.raises(ConfigError):
        BlankingSchedule([(10, 5), (12, 3)])
    s = BlankingSchedule()
    s.append(0, 4)
    s.append(4, 0)
    s.merge(2, 10)
    s.merge(30, 2)
    assert s.intervals == [(0, 12), (30, 2)]
    assert s.total == 14
    with pytest.raises(ConfigError):
        s.append(31, 1)
    m = s.mask(20, offset=25)
    assert np.flatnonzero(m).tolist() == [5, 6]


def test_frames_carry_scan_order():
    fe = FrontendConfig()
    f = list(frames(np.arange(32).reshape(2, 16), fe))
    assert f[1].t_index == 1 and f[1].codes[0] == 16 and len(f[1].codes) == 16
