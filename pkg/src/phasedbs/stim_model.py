"""Biphasic current pulses into a series R-C electrode, with active charge balancing.

Currents are in uA and times in integer microsecond ticks, so accumulated
charge (pC) stays integer-exact in double precision.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class StimPulseParams:
    i_cathodic_ua: float = 100.0
    i_anodic_ua: float = 100.0
    w_cathodic_us: int = 100
    w_anodic_us: int = 100
    gap_us: int = 10
    v_safe_mv: float = 4.0
    delta_i_ua: float = 2.0
    compliance_v: float = 8.0

    def __post_init__(self):
        if min(self.i_cathodic_ua, self.i_anodic_ua, self.w_cathodic_us, self.w_anodic_us) <= 0:
            raise ConfigError("pulse currents and widths must be positive")
        if self.v_safe_mv <= 0 or self.compliance_v <= 0 or self.gap_us < 0 or self.delta_i_ua < 0:
            raise ConfigError("v_safe and compliance must be positive; gap and delta_i non-negative")


@dataclass(frozen=True)
class ElectrodeState:
    v_cap: float = 0.0
    r_s_ohm: float = 5000.0
    c_f: float = 330e-9
    r_dis_ohm: float = 10000.0

    def __post_init__(self):
        if min(self.r_s_ohm, self.c_f, self.r_dis_ohm) <= 0 or not math.isfinite(self.v_cap):
            raise ConfigError("electrode parameters must be positive and v_cap finite")


@dataclass
class StimTrace:
    t_us: np.ndarray
    i_ua: np.ndarray
    v_out: np.ndarray
    v_cap: np.ndarray
    clamped: np.ndarray
    residual_v: float
    tick_us: float = 1.0

    @property
    def n_clamped(self):
        return int(np.count_nonzero(self.clamped))


def run_pulse(params, state=None, tick_us=1.0):
    """Simulate one cathodic-gap-anodic pulse. Returns ``(trace, new_state, residual_v)``.

    The capacitor integrates ``i/C`` each tick; the reported ``v_cap`` sample
    is the value at the end of that tick. ``v_out = i*R + v_cap`` is clamped to
    the compliance rail and flagged where clamping engages.
    """
    state = state or ElectrodeState()
    p = params
    if tick_us > min(p.w_cathodic_us, p.w_anodic_us) / 10:
        raise ConfigError("simulation tick must be at most a tenth of the shortest phase")
    n_c = int(round(p.w_cathodic_us / tick_us))
    n_g = int(round(p.gap_us / tick_us))
    n_a = int(round(p.w_anodic_us / tick_us))
    i = np.concatenate([np.full(n_c, -float(p.i_cathodic_ua)), np.zeros(n_g),
                        np.full(n_a, float(p.i_anodic_ua))])
    q_pc = np.cumsum(i * tick_us)  # uA * us = pC, exact for integer inputs
    v_cap = state.v_cap + q_pc * 1e-12 / state.c_f
    v_raw = i * 1e-6 * state.r_s_ohm + v_cap
    clamped = np.abs(v_raw) > p.compliance_v
    v_out = np.clip(v_raw, -p.compliance_v, p.compliance_v)
    residual = float(v_cap[-1]) if v_cap.size else state.v_cap
    trace = StimTrace(np.arange(1, i.size + 1) * tick_us, i, v_out, v_cap, clamped, residual, tick_us)
    return trace, replace(state, v_cap=residual), residual


def cb_update(residual_v, params):
    """One step of the charge-balancing loop on the anodic amplitude."""
    v_safe = params.v_safe_mv * 1e-3
    i_a = params.i_anodic_ua
    if residual_v > v_safe:
        i_a -= params.delta_i_ua
    elif residual_v < -v_safe:
        i_a += params.delta_i_ua
    else:
        return params
    lo = params.delta_i_ua if params.delta_i_ua > 0 else i_a
    i_a = min(max(i_a, lo), 2 * params.i_cathodic_ua)
    return replace(params, i_anodic_ua=i_a)


def passive_discharge(state, duration_us):
    """Exact exponential decay of the capacitor through ``r_dis``."""
    if duration_us <= 0:
        return state
    tau_us = state.r_dis_ohm * state.c_f * 1e6
    return replace(state, v_cap=state.v_cap * math.exp(-duration_us / tau_us))


def charge_balance_run(params, n_pulses=40, interval_us=166_667, state=None, cb=True, tick_us=1.0):
    """Repeated pulses with optional CB and passive discharge between them.

    Returns ``(residuals_v, anodic_currents_ua, traces)``.
    """
    state = state or ElectrodeState()
    residuals, currents, traces = [], [], []
    for _ in range(n_pulses):
        trace, state, res = run_pulse(params, state, tick_us)
        residuals.append(res)
        currents.append(params.i_anodic_ua)
        traces.append(trace)
        if cb:
            params = cb_update(res, params)
        pulse_len = trace.t_us[-1] if trace.t_us.size else 0.0
        state = passive_discharge(state, interval_us - pulse_len)
    return np.array(residuals), np.array(currents), traces
