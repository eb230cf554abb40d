"""Experiment drivers behind the CLI subcommands.

Each driver returns a JSON-ready dict; artifact writing is optional and
deterministic (no timestamps, sorted keys, timing kept out of hashed files).
"""

import dataclasses
import hashlib
import json
import math
import os
import time

import numpy as np

from . import kernels
from .circstats import circular_stats, wrap_deg
from .config import RunConfig, config_digest
from .connectivity import PairConfig, PairSpec, default_trig, ideal_features
from .dataio import read_traces, write_events, write_features, write_phases
from .errors import ConfigError, DataError
from .fir import BandConfig, design_filters
from .fixedpoint import PHASE_CODES
from .oracle import oracle_ground_truth
from .phase import _ANGLES, default_luts, op_count_model, sweep_errors, sweep_grid
from .pipeline import ClosedLoop
from .signals import (
    BlankingSchedule, CoupledParams, afe_digitize, count_clipped,
    gen_coupled_pair, gen_sine_pink,
)
from .stim_control import PHASE_MODES, StimConfig
from .stim_model import charge_balance_run, run_pulse

GAMMA = BandConfig(60.0, 100.0)


def _json_dump(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sha(arr):
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()


# --------------------------------------------------------------- inputs

def make_input(cfg):
    """Voltage traces ``(n_channels, n)`` for the configured input."""
    fe = cfg.frontend
    nch = fe.n_channels
    inp = cfg.input
    if inp is None:
        raise ConfigError("config has no input section")
    rate = fe.per_channel_rate_hz
    if inp.path is not None:
        traces, file_rate = read_traces(inp.path, inp.format)
        if abs(file_rate - rate) > 1e-6 * rate:
            raise DataError(f"input rate {file_rate:g} Hz differs from the front-end rate {rate:g} Hz")
        if traces.shape[0] > nch:
            raise DataError(f"input has {traces.shape[0]} channels, front-end has {nch}")
        out = np.zeros((nch, traces.shape[1]))
        out[:traces.shape[0]] = traces
        return out
    g = inp.generator
    n = int(round(g.duration_s * rate))
    out = np.zeros((nch, n))
    if g.kind == "sine-pink":
        for ch in g.channels:
            out[ch] = gen_sine_pink(g.amp_pp_v, g.freq_hz, g.pink_rms_v, g.duration_s, rate,
                                    seed=cfg.seed * 1009 + ch)
    elif g.kind != "zeros":
        params = dataclasses.replace(g.pair or CoupledParams(), duration_s=g.duration_s, rate_hz=rate)
        pair = gen_coupled_pair(g.kind, params, seed=cfg.seed)
        out[g.channels[0]] = pair[0]
        out[g.channels[1]] = pair[1]
    return out


def closed_loop_for(cfg, filter_sets=None):
    return ClosedLoop(filter_sets or cfg.filter_sets(), cfg.pairs, cfg.window, cfg.stim,
                      cfg.frontend.adc_bits)


# ------------------------------------------------------------ run_offline

def run_offline(cfg, out_dir=None, traces=None):
    """Closed-loop run; writes features/phases/triggers CSVs and summary.json."""
    traces = make_input(cfg) if traces is None else np.asarray(traces, dtype=np.float64)
    blanking = BlankingSchedule(list(cfg.blanking))
    codes = afe_digitize(traces, cfg.frontend, blanking)
    filter_sets = cfg.filter_sets()
    loop = closed_loop_for(cfg, filter_sets)
    result = loop.run(codes, blanking)
    digests = sorted({fs.digest() for fs in filter_sets})
    modes = {}
    for e in result.events:
        modes[e.mode] = modes.get(e.mode, 0) + 1
    summary = {
        "config_sha256": config_digest(cfg),
        "input_sha256": _sha(codes),
        "lut_sha256": default_luts().digest(),
        "trig_lut_sha256": _sha(default_trig().quarter),
        "filter_sha256": digests,
        "seed": cfg.seed,
        "n_channels": loop.n_channels,
        "n_input_samples": int(codes.shape[0]),
        "n_decimated_samples": int(result.phases.shape[0]),
        "n_windows": len({r.window_index for r in result.features}),
        "n_feature_records": len(result.features),
        "n_triggers": len(result.events),
        "triggers_by_mode": modes,
        "fir_saturations": result.saturations,
        "saturated": result.saturations > 0,
        "clipped_codes": count_clipped(codes, cfg.frontend),
        "degenerate_phases": int(result.degenerate.sum()),
        "blanked_input_samples": int(result.blanking.total + blanking.total),
        "flagged_windows": result.flagged_windows(),
        "gate_missing": result.gate_missing,
        "group_delay_s": [fs.group_delay_s for fs in filter_sets[:1]][0],
    }
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_features(os.path.join(out_dir, "features.csv"), result.features)
        write_events(os.path.join(out_dir, "triggers.csv"), result.events)
        if cfg.write_phases:
            write_phases(os.path.join(out_dir, "phases.csv"), result.phases, result.envelopes)
        _json_dump(os.path.join(out_dir, "summary.json"), summary)
    return result, summary


# ----------------------------------------------------------- phase error

def _phase_stim(cfg, compensate):
    base = next((s for s in cfg.stim if s.mode in PHASE_MODES), None)
    base = base or StimConfig(rate_hz=cfg.frontend.per_channel_rate_hz / 4)
    return dataclasses.replace(base, compensate=compensate, monitor_channel=0, stim_channel=0)


def phase_error_experiment(cfg, trace=None, compensate=True, pink_rms_v=None, frontend=None,
                           settle_s=1.0):
    """Phase-locking error of every trigger against the zero-phase oracle.

    The error is ``wrap(target - oracle)`` in degrees, so a late trigger
    (true phase past the target) reads negative. Triggers within
    ``settle_s`` of either end are skipped: the filters are still filling
    at the start and the oracle's forward-backward pass is edge-biased.
    """
    pe = cfg.phase_error
    fe = frontend or dataclasses.replace(cfg.frontend, scan_order=(0,))
    rate = fe.per_channel_rate_hz
    if trace is None:
        pink = pe.pink_rms_v if pink_rms_v is None else pink_rms_v
        trace = gen_sine_pink(pe.amp_pp_v, pe.freq_hz, pink, pe.duration_s, rate, seed=cfg.seed)
    trace = np.asarray(trace, dtype=np.float64)
    stim = _phase_stim(cfg, compensate)
    band = cfg.filters.band_for(0)
    fs = design_filters(band, rate, cfg.filters.lpf_spec(), cfg.filters.band_taps,
                        cfg.filters.band_atten_db)
    codes = afe_digitize([trace], fe)
    result = ClosedLoop([fs], stim=[stim], adc_bits=fe.adc_bits).run(codes)
    truth = oracle_ground_truth(trace, band, rate)
    dec = fs.decimation
    lo, hi = settle_s * rate, trace.size - settle_s * rate
    idx = np.array([e.t_index * dec for e in result.events if lo <= e.t_index * dec < hi], dtype=np.int64)
    targets = np.array([e.target for e in result.events if lo <= e.t_index * dec < hi], dtype=np.float64)
    errors = wrap_deg(targets * 360.0 / PHASE_CODES - np.rad2deg(truth[idx])) if idx.size else np.zeros(0)
    stats = circular_stats(errors)
    return {
        "status": "ok" if idx.size else "empty",
        "compensate": compensate,
        "mode": stim.mode,
        "n_triggers": len(result.events),
        "n_scored": int(idx.size),
        "stats": stats.to_json(),
        "errors_deg": errors.tolist(),
        "fir_saturations": result.saturations,
        "clipped_codes": count_clipped(codes, fe),
    }


def noise_sweep(cfg):
    """Resultant length versus pink-noise level (multiples of the sine rms)."""
    pe = cfg.phase_error
    fe = dataclasses.replace(cfg.frontend, scan_order=(0,), adc_fullscale_vpp=pe.noise_fullscale_vpp)
    sine_rms = pe.amp_pp_v / 2 / math.sqrt(2)
    runs = []
    for level in pe.noise_levels:
        r = phase_error_experiment(cfg, pink_rms_v=level * sine_rms, frontend=fe)
        runs.append({"level": level, "pink_rms_v": level * sine_rms,
                     "r": r["stats"]["circular_resultant_r"],
                     "circular_mean_deg": r["stats"]["circular_mean_deg"],
                     "n_scored": r["n_scored"], "fir_saturations": r["fir_saturations"],
                     "clipped_codes": r["clipped_codes"]})
    rs = [x["r"] for x in runs]
    return {
        "runs": runs,
        "monotonic": all(a > b for a, b in zip(rs, rs[1:])),
        "saturation_free": all(x["fir_saturations"] == 0 and x["clipped_codes"] == 0 for x in runs),
    }


# ------------------------------------------------------------ correlation

LSB_Q15 = 1.0 / 32768


def pearson(a, b, min_var=10 * LSB_Q15 ** 2):
    """Pearson r, or ``None`` with a degenerate flag if either variance is tiny."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size != b.size or a.size < 2:
        raise DataError("correlation needs two equal-length sequences of at least 2 values")
    if a.var() < min_var or b.var() < min_var:
        return None, True
    return float(np.corrcoef(a, b)[0, 1]), False


def _pair_run(cfg, kind, params, n_windows, bands, seed):
    """Hardware and ideal feature series for one synthetic pair."""
    N = cfg.window.n_samples
    fe = dataclasses.replace(cfg.frontend, scan_order=(0, 1))
    rate = fe.per_channel_rate_hz
    fsets = [design_filters(b, rate, cfg.filters.lpf_spec(), cfg.filters.band_taps,
                            cfg.filters.band_atten_db) for b in bands]
    dec = fsets[0].decimation
    # one leading window absorbs the filter fill; it is dropped from both series
    duration = (n_windows + 1) * N * dec / rate
    params = dataclasses.replace(params, duration_s=duration, rate_hz=rate)
    traces = gen_coupled_pair(kind, params, seed)
    feature = "PAC" if kind == "pac-coupled" else "PLV"
    pairs = PairConfig((PairSpec(0, 0, 1, feature),))
    codes = afe_digitize(traces, fe)
    res = ClosedLoop(fsets, pairs, cfg.window, adc_bits=fe.adc_bits).run(codes)
    hw = res.feature_series(feature, 0)[1:n_windows + 1] * LSB_Q15
    delay = int(round(fsets[0].group_delay_s * rate / dec))
    ideal = ideal_features(traces, bands, pairs.pairs, N, rate, dec, delay)
    ref = ideal[feature.lower()][1:n_windows + 1, 0]
    return hw, ref


def correlation_experiment(cfg):
    """Pearson r between fixed-point and ideal PLV and PAC across sweep windows.

    The sweeps (lag jitter ramp for PLV, coupling ramp for PAC) provide the
    scored windows. Control windows (independent pairs, zero coupling) are
    summarised separately: on uncorrelated noise the short hardware filters
    and the narrow reference filter see different noise, so those values are
    not expected to track each other.
    """
    cc = cfg.correlate
    band = cfg.filters.band_for(0)
    base = CoupledParams(noise_rms_v=cc.noise_rms_v)
    sweeps = {
        "PLV": ("plv-locked", dataclasses.replace(base, jitter_rad=tuple(cc.plv_jitter_rad)),
                [band, band], "independent", base),
        "PAC": ("pac-coupled", dataclasses.replace(base, coupling=tuple(cc.pac_coupling)),
                [band, GAMMA], "pac-coupled", dataclasses.replace(base, coupling=0.0)),
    }
    out = {}
    for i, (name, (kind, params, bands, c_kind, c_params)) in enumerate(sweeps.items()):
        hw, ref = _pair_run(cfg, kind, params, cc.n_windows, bands, cfg.seed + 2 * i)
        r, degenerate = pearson(hw, ref)
        entry = {"r": r, "degenerate": degenerate, "n_windows": int(hw.size),
                 "hardware": hw.tolist(), "ideal": ref.tolist()}
        if cc.n_controls:
            c_hw, c_ref = _pair_run(cfg, c_kind, c_params, cc.n_controls, bands, cfg.seed + 2 * i + 1)
            entry["controls"] = {"n_windows": int(c_hw.size),
                                 "hardware_mean": float(c_hw.mean()), "ideal_mean": float(c_ref.mean()),
                                 "hardware": c_hw.tolist(), "ideal": c_ref.tolist()}
        out[name] = entry
    return out


# ------------------------------------------------------------------ bench

def _throughput(fn, repeats, n):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return n / best if best > 0 else math.inf


def bench_compare(bits=10, repeats=3, throughput_seconds=10.0, seed=0):
    """Exhaustive accuracy of LPE and CORDIC plus op counts and throughput."""
    luts = default_luts()
    impls = {"numpy": kernels.numpy_impl}
    if kernels.numba_impl is not None:
        impls["numba"] = kernels.numba_impl
    out = {"sweep_bits": bits, "n_pairs": (1 << bits) ** 2, "kernels": {}}
    re, im = sweep_grid(bits)
    for name in ("lpe", "cordic"):
        errs = sweep_errors(name, bits)
        entry = {
            "max_error_codes": float(errs.max()),
            "mean_error_codes": float(errs.mean()),
            "frac_within_1": float(np.mean(errs <= 1)),
            "ops": op_count_model(name),
            "conversions_per_s": {},
        }
        for backend, impl in impls.items():
            if name == "lpe":
                fn = lambda impl=impl: impl.lpe_phase(re, im, luts.recip, luts.lin)
            else:
                fn = lambda impl=impl: impl.cordic_phase(re, im, _ANGLES)
            fn()
            entry["conversions_per_s"][backend] = _throughput(fn, repeats, re.size)
        out["kernels"][name] = entry
    out["pipeline"] = pipeline_throughput(throughput_seconds, repeats, seed)
    return out


def throughput_config(seed=0):
    """16 channels, 8 PLV pairs and one blanking phase-locked engine."""
    pairs = PairConfig(tuple(PairSpec(i, i, i + 8, "PLV") for i in range(8)))
    return RunConfig(seed=seed, pairs=pairs, stim=(StimConfig(),)).with_seed(seed)


def pipeline_throughput(seconds=10.0, repeats=3, seed=0):
    """Real-time factor of the full 16-channel closed loop on both backends."""
    cfg = throughput_config(seed)
    rate = cfg.frontend.per_channel_rate_hz
    x = gen_sine_pink(2e-3, 6.0, 0.5e-3, seconds, rate, seed=seed)
    codes = afe_digitize([x] * cfg.frontend.n_channels, cfg.frontend)
    fsets = cfg.filter_sets()
    out = {"signal_seconds": seconds, "channels": cfg.frontend.n_channels}
    for backend in ("numba", "numpy"):
        impl = getattr(kernels, f"{backend}_impl")
        if impl is None:
            continue
        with kernels.use_backend(backend):
            loop = closed_loop_for(cfg, fsets)
            loop.run(codes[: int(rate)])
            sps = _throughput(lambda: loop.run(codes), repeats, codes.size)
        out[backend] = {"input_samples_per_s": sps, "realtime_factor": sps / (rate * cfg.frontend.n_channels)}
    return out


# --------------------------------------------------------- charge balance

def charge_balance_experiment(cfg):
    """Uncompensated residual and the CB-on residual sequence for a width mismatch."""
    cb = cfg.charge_balance
    p = cfg.pulse
    mism = dataclasses.replace(p, w_anodic_us=int(round(p.w_cathodic_us * (1 + cb.width_mismatch))))
    trace, _, residual = run_pulse(mism, cfg.electrode, cb.tick_us)
    closed_form = (mism.i_anodic_ua * mism.w_anodic_us - mism.i_cathodic_ua * mism.w_cathodic_us) \
        * 1e-12 / cfg.electrode.c_f
    res, currents, traces = charge_balance_run(mism, cb.n_pulses, cb.interval_us, cfg.electrode,
                                               cb=cb.enabled, tick_us=cb.tick_us)
    v_safe = p.v_safe_mv * 1e-3
    inside = np.abs(res) < v_safe
    first = next((i for i in range(res.size) if inside[i:].all()), None)
    return {
        "width_mismatch": cb.width_mismatch,
        "uncompensated_residual_mv": residual * 1e3,
        "closed_form_residual_mv": closed_form * 1e3,
        "residuals_mv": (res * 1e3).tolist(),
        "anodic_currents_ua": currents.tolist(),
        "settled_from_pulse": None if first is None else first + 1,
        "v_safe_mv": p.v_safe_mv,
        "single_pulse_trace": trace,
        "traces": traces,
    }


# ------------------------------------------------------------ group delay

def measured_group_delay(filter_set, freq_hz=6.0, adc_bits=10, seconds=4.0, amplitude=300):
    """Delay in decimated samples of a tone through the fixed-point filters.

    The tone phase at the output is compared with the input phase at the
    decimated instants, after the filters have filled.
    """
    from .fir import ChannelState

    rate = filter_set.input_rate_hz
    n = int(seconds * rate)
    t = np.arange(n) / rate
    codes = np.round(amplitude * np.sin(2 * np.pi * freq_hz * t)).astype(np.int64)
    _, re, _ = ChannelState(filter_set, adc_bits).process_block(codes)
    dec = filter_set.decimation
    td = t[::dec][:re.size]
    skip = re.size // 4
    y = re[skip:].astype(np.float64)
    tt = td[skip:]
    w = 2 * np.pi * freq_hz
    basis = np.column_stack([np.sin(w * tt), np.cos(w * tt)])
    (a, b), *_ = np.linalg.lstsq(basis, y, rcond=None)
    lag_rad = -math.atan2(b, a)
    return lag_rad / w * filter_set.decimated_rate_hz
