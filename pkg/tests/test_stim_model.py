import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from phasedbs.errors import ConfigError
from phasedbs.stim_model import (
    ElectrodeState, StimPulseParams, cb_update, charge_balance_run, passive_discharge, run_pulse,
)

MISMATCH = StimPulseParams(w_anodic_us=150)


def test_balanced_pulse_leaves_no_residual():
    _, state, res = run_pulse(StimPulseParams())
    assert res == 0.0 and state.v_cap == 0.0


def test_mismatch_residual_closed_form():
    _, _, res = run_pulse(MISMATCH)
    assert res == pytest.approx(5e-9 / 330e-9, rel=1e-12)
    assert res * 1e3 == pytest.approx(15.15, abs=0.01)


def test_resistive_step_and_compliance():
    tr, _, _ = run_pulse(StimPulseParams())
    assert tr.v_out[0] == pytest.approx(-0.5 - 100e-12 / 330e-9, rel=1e-9)
    assert tr.n_clamped == 0
    tr, _, _ = run_pulse(StimPulseParams(i_cathodic_ua=2000, i_anodic_ua=2000))
    assert tr.n_clamped > 0 and np.abs(tr.v_out).max() == 8.0


@given(st.integers(1, 500), st.integers(1, 500), st.integers(10, 400), st.integers(10, 400))
def test_residual_is_net_charge_over_c(i_c, i_a, w_c, w_a):
    p = StimPulseParams(i_cathodic_ua=i_c, i_anodic_ua=i_a, w_cathodic_us=w_c, w_anodic_us=w_a)
    _, _, res = run_pulse(p)
    assert res == pytest.approx((i_a * w_a - i_c * w_c) * 1e-12 / 330e-9, abs=1e-12)


def test_cb_update_rule():
    p = StimPulseParams()
    assert cb_update(0.0, p) is p
    assert cb_update(15.15e-3, p).i_anodic_ua == 98.0
    assert cb_update(-15.15e-3, p).i_anodic_ua == 102.0
    assert cb_update(3.9e-3, p) is p


def test_charge_balancing_converges():
    res, cur, _ = charge_balance_run(MISMATCH, n_pulses=40)
    inside = np.abs(res) < 4e-3
    first = next(i for i in range(res.size) if inside[i:].all())
    assert first + 1 <= 20
    # stepping stops at the first current inside the band: (150 i_a - 10000) pC / 330 nF < 4 mV
    assert cur[-1] == 74.0
    assert (150 * 74 - 10_000) * 1e-12 / 330e-9 < 4e-3 <= (150 * 76 - 10_000) * 1e-12 / 330e-9
    # without CB every pulse leaves the full residual; 3.3 ms discharge clears it between pulses
    off, cur, _ = charge_balance_run(MISMATCH, n_pulses=5, cb=False)
    assert np.allclose(off, 5e-9 / 330e-9, rtol=1e-6)
    assert np.all(cur == 100.0)


def test_passive_discharge():
    s = ElectrodeState(v_cap=10e-3, r_dis_ohm=10_000, c_f=330e-9)
    assert passive_discharge(s, 3300).v_cap == pytest.approx(3.679e-3, abs=1e-6)
    assert passive_discharge(s, 0) is s
    assert abs(passive_discharge(s, 33_000).v_cap) < 0.5e-6


def test_parameter_validation():
    with pytest.raises(ConfigError):
        StimPulseParams(i_cathodic_ua=0)
    with pytest.raises(ConfigError):
        ElectrodeState(c_f=0)
    with pytest.raises(ConfigError):
        run_pulse(StimPulseParams(), tick_us=20)
    assert math.isclose(ElectrodeState().r_s_ohm, 5000)
