import numpy as np
import pytest
from hypothesis import given, strategies as st

from phasedbs import kernels
from phasedbs.errors import ConfigError, DesignError
from phasedbs.experiments import measured_group_delay
from phasedbs.fir import (
    THETA, BandConfig, ChannelState, FilterSet, FirPipeline, LpfSpec, amplitude,
    design_band_pair, design_filters, design_lpf, mac_budget, process_sample, response,
)
from phasedbs.phase import lpe_phase


@pytest.fixture(scope="module")
def theta():
    return design_filters(THETA)


def test_default_delays(theta):
    assert theta.group_delay_lpf == 16
    assert theta.group_delay_band == 27
    assert theta.group_delay_s == pytest.approx(0.031, abs=1e-12)


def test_63_tap_band_delay():
    fs = design_filters(THETA, band_taps=63)
    assert fs.group_delay_band == 31
    assert fs.group_delay_band / fs.decimated_rate_hz == pytest.approx(0.031)


@pytest.mark.parametrize("band", [THETA, BandConfig(13.0, 30.0), BandConfig(60.0, 100.0)])
def test_band_pair_symmetry_and_dc(band):
    re, im = design_band_pair(band, 1000.0, 55)
    assert re.sum() == 0
    assert np.array_equal(re, re[::-1])
    assert np.array_equal(im, -im[::-1])
    g = amplitude(re, band.f_center_hz, 1000.0)[0]
    assert g == pytest.approx(1.0, abs=2e-3)


def test_quadrature_at_six_hz(theta):
    hr = response(theta.bpf_taps, 6.0, 1000.0)[0]
    hi = response(theta.ht_taps, 6.0, 1000.0)[0]
    assert abs(20 * np.log10(abs(hi) / abs(hr))) < 0.1
    lag = np.degrees(np.angle(hr) - np.angle(hi)) % 360
    assert lag == pytest.approx(90.0, abs=1.0)


def test_lpf_attenuation_and_dc(theta):
    assert theta.lpf_taps.sum() == pytest.approx(32768, abs=2)
    assert theta.lpf_atten_db >= 50.0
    stop = np.linspace(500, 2000, 200)
    assert amplitude(theta.lpf_taps, stop, 4000.0).max() < 10 ** (-50 / 20) * 1.001


def test_design_errors():
    with pytest.raises(DesignError) as e:
        design_lpf(LpfSpec(taps=9, atten_db=60), 4000.0)
    assert e.value.achieved_db < 60
    with pytest.raises(ConfigError):
        design_band_pair(THETA, 1000.0, 54)
    with pytest.raises(ConfigError):
        design_filters(BandConfig(8.0, 4.0))
    with pytest.raises(ConfigError):
        BandConfig(4.0, 600.0).validate(1000.0)


def test_filter_set_json_round_trip(theta):
    doc = theta.to_json()
    back = FilterSet.from_json(doc)
    assert back.digest() == theta.digest()
    doc["bpf_taps"][0] += 1
    with pytest.raises(ConfigError):
        FilterSet.from_json(doc)


def test_mac_budget():
    fs = design_filters(THETA, lpf_spec=LpfSpec(31, 250.0, 40.0), band_taps=63)
    b = mac_budget(fs, 16)
    assert b["total_macs"] == 16 * (31 + 63 + 63) * 1000
    assert b["lpf_shift_rate_hz"] == 4000 and b["band_shift_rate_hz"] == 1000
    assert mac_budget(fs, 0)["total_macs"] == 0


def test_impulse_reproduces_band_taps(theta):
    # unit (2^15) impulse into the band delay line
    L = theta.bpf_taps.size
    ypad = np.zeros(2 * L - 1, np.int64)
    ypad[L - 1] = 1 << 15
    y, sat = kernels.fir_q15(ypad, theta.bpf_taps, 0, 1, L)
    assert np.array_equal(y, theta.bpf_taps)
    assert not sat.any()


def test_rate_and_count(theta):
    st_ = ChannelState(theta)
    t, re, im = st_.process_block(np.zeros(4000, np.int64))
    assert t.size == 1000 and re.size == im.size == 1000
    assert t[0] == 0 and t[-1] == 999


def test_phase_advance_of_tone(theta):
    n = 4000 * 4
    x = np.round(500 * np.sin(2 * np.pi * 6 * np.arange(n) / 4000)).astype(np.int64)
    _, re, im = ChannelState(theta).process_block(x)
    ph = lpe_phase(re[200:], im[200:])
    steps = np.diff(ph) % 1024
    assert steps.mean() == pytest.approx(6.144, abs=0.01)
    wraps = np.count_nonzero(np.diff(ph[:1000]) < -512)
    assert wraps == 6


def test_measured_delay(theta):
    assert measured_group_delay(theta) == pytest.approx(31.0, abs=1.0)


@given(st.lists(st.integers(-512, 511), min_size=1, max_size=300), st.data())
def test_push_equals_block(codes, data):
    fs = design_filters(THETA)
    ref = ChannelState(fs)
    out = [process_sample(ref, c) for c in codes]
    pushed = [(s.t_index, s.re, s.im) for s in out if s is not None]
    blk = ChannelState(fs)
    cuts = sorted(data.draw(st.lists(st.integers(0, len(codes)), max_size=4)))
    got = []
    for a, b in zip([0] + cuts, cuts + [len(codes)]):
        t, re, im = blk.process_block(codes[a:b])
        got += list(zip(t.tolist(), re.tolist(), im.tolist()))
    assert got == pushed
    assert blk.saturations == ref.saturations


def test_pipeline_equals_channels():
    fsets = [design_filters(THETA), design_filters(BandConfig(13.0, 30.0), band_taps=41)]
    rng = np.random.default_rng(3)
    codes = rng.integers(-512, 512, (1001, 2))
    pipe = FirPipeline(fsets)
    t1, re1, im1 = pipe.process_block(codes[:333])
    t2, re2, im2 = pipe.process_block(codes[333:])
    for ch, fs in enumerate(fsets):
        _, re, im = ChannelState(fs).process_block(codes[:, ch])
        assert np.array_equal(np.concatenate([re1[:, ch], re2[:, ch]]), re)
        assert np.array_equal(np.concatenate([im1[:, ch], im2[:, ch]]), im)
    assert np.array_equal(np.concatenate([t1, t2]), np.arange(251))


def test_rewind_matches_fresh_processing():
    fs = design_filters(THETA)
    rng = np.random.default_rng(5)
    codes = rng.integers(-512, 512, (400, 3))
    pipe = FirPipeline.uniform(fs, 3)
    pipe.process_block(codes[:37])
    snap = pipe.snapshot()
    _, _, _, y, sat = pipe.process_block(codes[37:300], detail=True)
    pipe.rewind(snap, codes[37:300], y, sat, 100, 25)
    ref = FirPipeline.uniform(fs, 3)
    ref.process_block(codes[:137])
    a = pipe.process_block(codes[137:])
    b = ref.process_block(codes[137:])
    assert all(np.array_equal(u, v) for u, v in zip(a, b))
    assert pipe.n_in == ref.n_in and pipe.t_out == ref.t_out


def test_saturation_counted():
    fs = design_filters(THETA)
    st_ = ChannelState(fs)
    x = np.where((np.arange(8000) // 40) % 2, 511, -512)  # ~50 Hz full-scale square
    st_.process_block(x)
    assert st_.saturations > 0
    _, re, _ = ChannelState(fs).process_block(x)
    assert re.max() <= 32767 and re.min() >= -32768


@pytest.mark.skipif(kernels.numba_impl is None, reason="numba unavailable")
def test_fir_backends_bit_identical():
    rng = np.random.default_rng(9)
    xpad = rng.integers(-32768, 32768, (4, 700))
    taps = rng.integers(-32768, 32768, (4, 33))
    a = kernels.numpy_impl.fir_q15(xpad, taps, 1, 4, 160)
    b = kernels.numba_impl.fir_q15(xpad, taps, 1, 4, 160)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    a = kernels.numpy_impl.fir_q15(xpad[0], taps[0], 0, 1, 600)
    b = kernels.numba_impl.fir_q15(xpad[0], taps[0], 0, 1, 600)
    assert np.array_equal(a[0], b[0])
