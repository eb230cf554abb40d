"""Trigger engine for phase- and feature-locked stimulation.

Modes:

* ``SamplePhase``  - upward crossing of a (delay-compensated) phase target
* ``SampleEnv``    - upward crossing of an envelope threshold
* ``WindowFeature``- at each window boundary while the feature is in range
* ``Combined``     - SamplePhase gated by the latest window value in range
* ``RandomPhase``  - SamplePhase against a PRBS target redrawn per trigger

All modes respect a refractory interval of ``ceil(rate / f_max)`` samples
and are suppressed while the front-end is blanked.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .fixedpoint import PHASE_CODES, PHASE_HALF, wrap_phase
from .signals import BlankingSchedule

MODES = ("SamplePhase", "SampleEnv", "WindowFeature", "Combined", "RandomPhase")
PHASE_MODES = ("SamplePhase", "Combined", "RandomPhase")
WRAP_GUARD_CODES = PHASE_CODES // 4  # pi/2 per sample

PRBS_TAPS = (16, 14, 13, 11)
PRBS_STEPS = 10


def _round_half_away(x):
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def advance_compensation(target, group_delay_s, f_center_hz):
    """Shift a phase target earlier by the pipeline delay at the band centre."""
    frac = group_delay_s * f_center_hz
    if frac < 0 or frac >= 1:
        raise ConfigError(f"delay of {frac:.3f} cycles cannot be compensated (must be in [0, 1))")
    return wrap_phase(int(target) - _round_half_away(PHASE_CODES * frac))


@dataclass(frozen=True)
class PrbsState:
    lfsr: int = 0xACE1

    def __post_init__(self):
        if not 0 < self.lfsr < 1 << 16:
            raise ConfigError("PRBS register must be a nonzero 16-bit value")


def lfsr_step(v):
    """One Fibonacci step of x^16 + x^14 + x^13 + x^11 + 1."""
    bit = (v ^ (v >> 2) ^ (v >> 3) ^ (v >> 5)) & 1
    return (v >> 1) | (bit << 15)


def prbs_next(state):
    """Advance 10 steps; the top 10 register bits become a signed phase code."""
    v = state.lfsr
    for _ in range(PRBS_STEPS):
        v = lfsr_step(v)
    code = v >> 6
    if code >= PHASE_HALF:
        code -= PHASE_CODES
    return PrbsState(v), code


@dataclass(frozen=True)
class StimConfig:
    mode: str = "SamplePhase"
    th_smp: int = -512
    th_win_l: int = 0
    th_win_h: int = 32767
    window_kind: str = "PLV"
    window_id: int = 0
    f_max_hz: float = 6.0
    group_delay_s: float = None
    f_center_hz: float = 6.0
    compensate: bool = True
    blank_duration_samples: int = 2
    rate_hz: float = 1000.0
    monitor_channel: int = 0
    stim_channel: int = 0
    prbs_seed: int = 0xACE1
    wrap_guard: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown stimulation mode {self.mode!r}")
        if self.window_kind not in ("PLV", "PAC", "SE"):
            raise ConfigError("window_kind must be PLV, PAC or SE")
        if self.th_win_l > self.th_win_h:
            raise ConfigError("th_win_l must not exceed th_win_h")
        if self.f_max_hz <= 0 or self.rate_hz <= 0:
            raise ConfigError("f_max_hz and rate_hz must be positive")
        if self.blank_duration_samples < 0:
            raise ConfigError("blank duration must be non-negative")
        if self.blank_duration_samples > self.refractory:
            raise ConfigError("blanking must not outlast the refractory interval")
        if self.mode == "RandomPhase":
            PrbsState(self.prbs_seed)

    @property
    def refractory(self):
        return math.ceil(self.rate_hz / self.f_max_hz)

    def effective_target(self, target=None):
        target = self.th_smp if target is None else target
        if not self.compensate or not self.group_delay_s:
            return wrap_phase(int(target))
        return advance_compensation(target, self.group_delay_s, self.f_center_hz)


@dataclass(frozen=True)
class TriggerEvent:
    t_index: int
    mode: str
    effective_target: int = None
    window_value: int = None
    channel: int = 0
    pair: int = None
    target: int = None
    stim_channel: int = 0


def phase_crossed(prev, cur, target, guard=True):
    """Upward crossing of ``target`` between two codes, in target-relative terms.

    The relative phase ``wrap(c - target)`` must go from negative to
    non-negative. With ``guard`` the jump in relative phase must also be
    under pi/2, which rejects the wrap of the relative phase at the antipode.
    Works on scalars or arrays.
    """
    d_prev = wrap_phase(np.asarray(prev, dtype=np.int64) - target)
    d_cur = wrap_phase(np.asarray(cur, dtype=np.int64) - target)
    hit = (d_prev < 0) & (d_cur >= 0)
    if guard:
        hit &= (d_cur - d_prev) < WRAP_GUARD_CODES
    return hit


class StimEngine:
    """Per-channel trigger state machine.

    :meth:`on_sample` is the reference per-sample interface; :meth:`scan`
    processes a block with the same semantics and is what the pipeline uses.
    """

    def __init__(self, cfg):
        self.cfg = cfg
        self.prbs = PrbsState(cfg.prbs_seed) if cfg.mode == "RandomPhase" else None
        self.target = None
        self.raw_target = None
        if cfg.mode in ("SamplePhase", "Combined"):
            self.raw_target = wrap_phase(cfg.th_smp)
            self.target = cfg.effective_target()
        elif cfg.mode == "RandomPhase":
            self._draw_target()
        self.prev_phase = None
        self.prev_env = None
        self.prev_window_index = None
        self.next_allowed = 0
        self.blank_until = 0
        self.gate_missing = 0

    def _draw_target(self):
        self.prbs, code = prbs_next(self.prbs)
        self.raw_target = code
        self.target = self.cfg.effective_target(code)

    def _fire(self, t, window_value):
        cfg = self.cfg
        ev = TriggerEvent(
            t_index=int(t), mode=cfg.mode,
            effective_target=None if self.target is None else int(self.target),
            window_value=None if window_value is None else int(window_value),
            channel=cfg.monitor_channel,
            pair=cfg.window_id if cfg.mode in ("WindowFeature", "Combined") else None,
            target=self.raw_target,
            stim_channel=cfg.stim_channel,
        )
        self.next_allowed = int(t) + cfg.refractory
        self.blank_until = int(t) + cfg.blank_duration_samples
        if cfg.mode == "RandomPhase":
            self._draw_target()
        return ev

    def _in_range(self, v):
        return v is not None and v >= 0 and self.cfg.th_win_l <= v <= self.cfg.th_win_h

    def on_sample(self, t_index, phase, env, latest_window=None, blanked=False):
        """Advance one decimated sample; returns a TriggerEvent or None.

        ``latest_window`` is ``(window_index, value)`` of the most recently
        completed window for the configured feature, or None if none yet.
        """
        cfg = self.cfg
        win_idx, win_val = latest_window if latest_window is not None else (None, None)
        boundary = win_idx is not None and win_idx != self.prev_window_index
        allowed = t_index >= self.next_allowed and t_index >= self.blank_until and not blanked
        fire = False
        mode = cfg.mode
        if mode in PHASE_MODES:
            crossed = self.prev_phase is not None and bool(
                phase_crossed(self.prev_phase, phase, self.target, cfg.wrap_guard))
            if mode == "Combined":
                if win_val is None:
                    if crossed and allowed:
                        self.gate_missing += 1
                    crossed = False
                elif not self._in_range(win_val):
                    crossed = False
            fire = crossed
        elif mode == "SampleEnv":
            fire = self.prev_env is not None and self.prev_env < cfg.th_smp <= env
        elif mode == "WindowFeature":
            fire = boundary and self._in_range(win_val)
        self.prev_phase = phase
        self.prev_env = env
        self.prev_window_index = win_idx
        if fire and allowed:
            return self._fire(t_index, win_val)
        return None

    def _candidates(self, lo, hi, phases, envs, boundary, has_win, in_range):
        """Trigger candidates on ``[lo, hi)`` before gating, plus Combined gate misses."""
        cfg = self.cfg
        if cfg.mode in PHASE_MODES:
            first = phases[lo - 1] if lo else (self.prev_phase if self.prev_phase is not None else 0)
            prev = np.concatenate([[first], phases[lo:hi - 1]])
            cand = phase_crossed(prev, phases[lo:hi], self.target, cfg.wrap_guard)
            if lo == 0 and self.prev_phase is None:
                cand[0] = False
            if cfg.mode == "Combined":
                return cand & in_range[lo:hi], cand & ~has_win[lo:hi]
            return cand, None
        if cfg.mode == "SampleEnv":
            first = envs[lo - 1] if lo else (self.prev_env if self.prev_env is not None else cfg.th_smp)
            prev = np.concatenate([[first], envs[lo:hi - 1]])
            return (prev < cfg.th_smp) & (envs[lo:hi] >= cfg.th_smp), None
        return boundary[lo:hi] & in_range[lo:hi], None

    def scan(self, t, phases, envs, win_index=None, win_value=None, blanked=None, stop_at_first=False):
        """Block version of :meth:`on_sample`; ``t`` must be increasing.

        ``win_index``/``win_value`` give, per sample, the latest completed
        window (-1 where none). Returns ``(events, n_consumed)``; with
        ``stop_at_first`` processing stops right after the first trigger.
        """
        cfg = self.cfg
        t = np.asarray(t, dtype=np.int64)
        n = t.size
        phases = np.asarray(phases, dtype=np.int64)
        envs = np.asarray(envs, dtype=np.int64)
        if win_index is None:
            win_index = np.full(n, -1, dtype=np.int64)
            win_value = np.full(n, -1, dtype=np.int64)
        win_index = np.asarray(win_index, dtype=np.int64)
        win_value = np.asarray(win_value, dtype=np.int64)
        has_win = win_index >= 0
        in_range = has_win & (win_value >= cfg.th_win_l) & (win_value <= cfg.th_win_h)
        prev_idx = np.concatenate([[-1 if self.prev_window_index is None else self.prev_window_index],
                                   win_index[:-1]])
        boundary = has_win & (win_index != prev_idx)
        ok = np.ones(n, dtype=bool) if blanked is None else ~np.asarray(blanked, dtype=bool)

        events = []
        start = 0
        hits = None
        empty = np.zeros(0, dtype=np.int64)
        while start < n:
            # t is increasing, so the refractory/blanking gate is a suffix
            first = max(start, int(np.searchsorted(t, max(self.next_allowed, self.blank_until))))
            if hits is None:
                # candidates depend on the target; a PRBS redraw invalidates them
                hits, miss, hi = empty, empty, first
                chunk = n if cfg.mode != "RandomPhase" else 4096
            j = int(np.searchsorted(hits, first))
            while j == hits.size and hi < n:
                lo, hi = hi, min(n, hi + chunk)
                chunk *= 2
                cand, missing = self._candidates(lo, hi, phases, envs, boundary, has_win, in_range)
                hits = np.concatenate([hits, lo + np.flatnonzero(cand & ok[lo:hi])])
                if missing is not None:
                    miss = np.concatenate([miss, lo + np.flatnonzero(missing & ok[lo:hi])])
                j = int(np.searchsorted(hits, first))
            stop = n if j == hits.size else int(hits[j]) + 1
            self.gate_missing += int(np.searchsorted(miss, stop) - np.searchsorted(miss, first))
            if j == hits.size:
                start = n
                break
            i = int(hits[j])
            wv = int(win_value[i]) if has_win[i] else None
            events.append(self._fire(t[i], wv))
            start = i + 1
            if cfg.mode == "RandomPhase":
                hits = None
            if stop_at_first:
                break
        consumed = start if events and stop_at_first else n
        if consumed:
            self.prev_phase = int(phases[consumed - 1])
            self.prev_env = int(envs[consumed - 1])
            self.prev_window_index = int(win_index[consumed - 1]) if has_win[consumed - 1] else None
        return events, consumed


def emit_blanking(event, cfg, schedule=None, decimation=4):
    """Append the input-rate blanking interval caused by ``event``."""
    schedule = schedule if schedule is not None else BlankingSchedule()
    if cfg.blank_duration_samples > 0:
        schedule.append(event.t_index * decimation, cfg.blank_duration_samples * decimation)
    return schedule
