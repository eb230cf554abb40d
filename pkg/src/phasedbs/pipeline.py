"""Closed-loop offline runner.

Filters, phase extraction, window features and trigger engines run as one
causal pass over the digitised input. A trigger that blanks the front-end
modifies inputs the filters have not consumed yet, so the runner rolls the
filter state back to the trigger and continues from there on the blanked
data instead of reprocessing whole blocks.
"""

import copy
import math
from dataclasses import dataclass, replace

import numpy as np

from .connectivity import (
    FeatureWindowRecord, PairConfig, WindowConfig, default_trig, envelope,
    pac_window, plv_window, se_window,
)
from .errors import ConfigError, DataError
from .fir import FirPipeline
from .phase import default_luts, lpe_phase
from .signals import BlankingSchedule
from .stim_control import StimEngine

MAX_BLOCK = 1024
# First block length after a blanking trigger once refractory has expired;
# doubles while no trigger is found. Keeps discarded filter work small.
PROBE_BLOCK = 32


@dataclass
class RunResult:
    phases: np.ndarray
    envelopes: np.ndarray
    bandpass: np.ndarray
    degenerate: np.ndarray
    features: list
    events: list
    blanking: BlankingSchedule
    saturations: int
    gate_missing: int
    n_input: int
    decimation: int = 4

    @property
    def t_index(self):
        return np.arange(self.phases.shape[0], dtype=np.int64)

    def feature_series(self, kind, ident):
        """Values of one feature across windows, in window order."""
        return np.array([r.value_q15 for r in self.features
                         if r.kind == kind and r.pair_or_ch == ident], dtype=np.int64)

    def flagged_windows(self):
        return sorted({r.window_index for r in self.features if r.flagged})


class _Contamination:
    """Decimated-index spans whose window features are unreliable."""

    def __init__(self):
        self.spans = []
        self.first = 0

    def add(self, lo, hi):
        self.spans.append((lo, hi))

    def hits(self, lo, hi):
        while self.first < len(self.spans) and self.spans[self.first][1] <= lo:
            self.first += 1
        return any(a < hi and b > lo for a, b in self.spans[self.first:])


class ClosedLoop:
    """Configured closed-loop processor for ``len(filter_sets)`` channels."""

    def __init__(self, filter_sets, pairs=None, window=None, stim=(), adc_bits=10,
                 luts=None, trig=None, max_block=MAX_BLOCK):
        self.filter_sets = list(filter_sets)
        if not self.filter_sets:
            raise ConfigError("at least one channel is required")
        self.n_channels = len(self.filter_sets)
        decs = {fs.decimation for fs in self.filter_sets}
        if len(decs) != 1:
            raise ConfigError("all channels must share one decimation factor")
        self.decimation = decs.pop()
        self.pairs = pairs or PairConfig()
        self.window = window or WindowConfig()
        self.adc_bits = adc_bits
        self.luts = luts or default_luts()
        self.trig = trig or default_trig()
        self.max_block = max_block
        for p in self.pairs.pairs:
            if max(p.ch_a, p.ch_b) >= self.n_channels:
                raise ConfigError(f"pair {p.id} references a channel beyond {self.n_channels - 1}")
        self.stim = [self._resolve(c) for c in stim]
        lpf_span = max(fs.lpf_taps.size for fs in self.filter_sets)
        band_span = max(fs.bpf_taps.size for fs in self.filter_sets)
        self.settle = band_span + math.ceil(lpf_span / self.decimation)

    def _resolve(self, cfg):
        if not 0 <= cfg.monitor_channel < self.n_channels:
            raise ConfigError(f"monitor channel {cfg.monitor_channel} is out of range")
        fs = self.filter_sets[cfg.monitor_channel]
        if abs(cfg.rate_hz - fs.decimated_rate_hz) > 1e-9:
            raise ConfigError(f"stim rate {cfg.rate_hz} Hz differs from the decimated rate "
                              f"{fs.decimated_rate_hz} Hz")
        if cfg.group_delay_s is None:
            cfg = replace(cfg, group_delay_s=fs.group_delay_s)
        if cfg.mode in ("WindowFeature", "Combined"):
            if cfg.window_kind == "SE":
                if not 0 <= cfg.window_id < self.n_channels:
                    raise ConfigError(f"SE gate channel {cfg.window_id} is out of range")
            elif not any(p.id == cfg.window_id and p.feature == cfg.window_kind for p in self.pairs.pairs):
                raise ConfigError(f"no {cfg.window_kind} pair with id {cfg.window_id}")
        return cfg

    def _window_features(self, w, phases, envs, bp, degen, flagged):
        N = self.window.n_samples
        sl = slice(w * N, (w + 1) * N)
        out = []
        for p in self.pairs.pairs:
            a, b = p.ch_a, p.ch_b
            if p.feature == "PLV":
                valid = ~(degen[sl, a] | degen[sl, b])
                v = plv_window(phases[sl, a], phases[sl, b], self.trig, valid=valid)
            else:
                _, v = pac_window(phases[sl, a], envs[sl, b], self.trig)
            out.append(FeatureWindowRecord(w, p.id, p.feature, int(v), flagged))
        for ch in range(self.n_channels):
            out.append(FeatureWindowRecord(w, ch, "SE", se_window(bp[sl, ch]), flagged))
        return out

    def run(self, codes, blanking=None):
        """Process ``codes`` of shape ``(n, n_channels)`` (or ``(n,)`` for one channel).

        ``blanking`` is a front-end schedule already applied to ``codes``;
        it only gates the trigger engines and flags windows.
        """
        codes = np.array(codes, dtype=np.int64)
        if codes.ndim == 1:
            codes = codes[:, None]
        if codes.ndim != 2 or codes.shape[1] != self.n_channels:
            raise DataError(f"expected codes of shape (n, {self.n_channels}), got {codes.shape}")
        n = codes.shape[0]
        dec = self.decimation
        N = self.window.n_samples
        m_total = -(-n // dec)
        nch = self.n_channels
        phases = np.zeros((m_total, nch), dtype=np.int64)
        envs = np.zeros((m_total, nch), dtype=np.int64)
        bp = np.zeros((m_total, nch), dtype=np.int64)
        degen = np.zeros((m_total, nch), dtype=bool)

        fir = FirPipeline(self.filter_sets, self.adc_bits)
        engines = [(cfg, StimEngine(cfg)) for cfg in self.stim]
        blanking_engines = any(cfg.blank_duration_samples > 0 for cfg in self.stim)
        external = blanking or BlankingSchedule()
        emitted = BlankingSchedule()
        dirty = _Contamination()
        for s, d in external.intervals:
            dirty.add(s // dec, -(-(s + d) // dec) + self.settle)

        features, events = [], []
        latest = {}
        last_window = -1
        pos = t0 = 0
        probe = PROBE_BLOCK
        while pos < n:
            boundary = (t0 // N + 1) * N
            size = self.max_block
            if blanking_engines:
                quiet = min(eng.next_allowed for cfg, eng in engines if cfg.blank_duration_samples > 0)
                size = min(size, quiet - t0 if quiet > t0 else probe)
            t_end = min(boundary, t0 + size)
            in_end = min(n, dec * t_end)
            blk = codes[pos:in_end]
            snap = fir.snapshot()
            t, re, im, y, sat = fir.process_block(blk, detail=True)
            k = t.size
            if k == 0:
                pos = in_end
                continue
            ph, dg = lpe_phase(re, im, self.luts, return_flags=True)
            env = envelope(re, im)
            blanked = emitted.mask(dec * k, dec * t0)[::dec] | external.mask(dec * k, dec * t0)[::dec]

            first = None
            if blanking_engines:
                for cfg, eng in engines:
                    if cfg.blank_duration_samples == 0:
                        continue
                    trial = copy.copy(eng)
                    evs, _ = trial.scan(t, ph[:, cfg.monitor_channel], env[:, cfg.monitor_channel],
                                        *self._gate(cfg, latest, last_window, k), blanked,
                                        stop_at_first=True)
                    if evs:
                        first = evs[0].t_index if first is None else min(first, evs[0].t_index)
            j = k if first is None else first - t0 + 1
            dur = 0
            for cfg, eng in engines:
                wi, wv = self._gate(cfg, latest, last_window, j)
                evs, _ = eng.scan(t[:j], ph[:j, cfg.monitor_channel], env[:j, cfg.monitor_channel],
                                  wi, wv, blanked[:j])
                events.extend(evs)
                if evs and evs[-1].t_index == first:
                    dur = max(dur, cfg.blank_duration_samples)
            phases[t0:t0 + j] = ph[:j]
            envs[t0:t0 + j] = env[:j]
            bp[t0:t0 + j] = re[:j]
            degen[t0:t0 + j] = dg[:j]

            if first is None:
                pos = in_end
                if blanking_engines and t0 >= quiet:
                    probe = min(2 * probe, self.max_block)
                t0 += k
            else:
                probe = PROBE_BLOCK
                n_inputs = dec * first - pos + 1
                fir.rewind(snap, blk, y, sat, n_inputs, j)
                emitted.merge(dec * first, dec * dur)
                codes[dec * first + 1:min(n, dec * (first + dur))] = 0
                dirty.add(first, first + dur + self.settle)
                pos += n_inputs
                t0 = first + 1

            while (last_window + 2) * N <= t0:
                w = last_window + 1
                flagged = dirty.hits(w * N, (w + 1) * N)
                recs = self._window_features(w, phases, envs, bp, degen, flagged)
                features.extend(recs)
                for r in recs:
                    latest[(r.kind, r.pair_or_ch)] = r.value_q15
                last_window = w

        return RunResult(
            phases=phases[:t0], envelopes=envs[:t0], bandpass=bp[:t0], degenerate=degen[:t0],
            features=features, events=events, blanking=emitted,
            saturations=fir.saturations,
            gate_missing=sum(eng.gate_missing for _, eng in engines),
            n_input=n, decimation=dec,
        )

    @staticmethod
    def _gate(cfg, latest, last_window, k):
        key = (cfg.window_kind, cfg.window_id)
        if last_window < 0 or key not in latest:
            return np.full(k, -1, dtype=np.int64), np.full(k, -1, dtype=np.int64)
        return np.full(k, last_window, dtype=np.int64), np.full(k, latest[key], dtype=np.int64)

