"""Trace and record files.

Traces: CSV with header ``t,ch0..chK`` in volts, or raw little-endian int16
interleaved by channel with a ``<file>.meta`` text sidecar holding
``rate_hz``, ``lsb_v`` and ``channels``. Records (features, triggers, phases,
stimulator traces) are plain CSV. Every emitter has a parser with
``parse(emit(x)) == x``; malformed input raises :class:`DataError` with the
offending line number.
"""

import csv
import io
import os

import numpy as np

from .connectivity import FeatureWindowRecord
from .errors import DataError
from .stim_control import TriggerEvent

FEATURE_HEADER = ["window", "pair_or_ch", "kind", "value_q15", "value_float", "flagged"]
EVENT_HEADER = ["t_index", "mode", "effective_target_code", "window_value", "pair",
                "target_code", "channel", "stim_channel"]
PHASE_HEADER = ["t_index", "ch", "phase_code", "envelope_q15"]
STIM_HEADER = ["t_us", "i_ua", "v_out_mv", "v_cap_mv"]
META_SUFFIX = ".meta"


def _fmt(x):
    # shortest repr that round-trips exactly
    return repr(float(x))


def _open_read(path):
    try:
        return open(path, newline="", encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read {path}: {e.strerror}") from None


def _rows(fh, header):
    reader = csv.reader(fh)
    try:
        first = next(reader)
    except StopIteration:
        raise DataError("empty file", line=1) from None
    if first != header:
        raise DataError(f"expected header {','.join(header)}", line=1)
    for row in reader:
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(f"expected {len(header)} fields, got {len(row)}", line=reader.line_num)
        yield reader.line_num, row


def _num(text, conv, line, name):
    try:
        return conv(text)
    except ValueError:
        raise DataError(f"bad {name} value {text!r}", line=line) from None


def _opt_int(text, line, name):
    return None if text == "" else _num(text, int, line, name)


# ------------------------------------------------------------------ traces

def trace_header(n_channels):
    return ["t"] + [f"ch{i}" for i in range(n_channels)]


def write_csv_traces(path, traces, rate_hz):
    """``traces``: (n_channels, n) volts."""
    traces = np.atleast_2d(np.asarray(traces, dtype=np.float64))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_header(traces.shape[0]))
        for i, col in enumerate(traces.T):
            w.writerow([_fmt(i / rate_hz)] + [_fmt(v) for v in col])


def read_csv_traces(path):
    """Returns ``(traces (n_channels, n), rate_hz)``; rate from the ``t`` column."""
    with _open_read(path) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty trace file", line=1) from None
        nch = len(header) - 1
        if nch < 1 or header != trace_header(nch):
            raise DataError("trace header must be t,ch0,ch1,...", line=1)
        t, rows = [], []
        for row in reader:
            if not row:
                continue
            line = reader.line_num
            if len(row) != nch + 1:
                raise DataError(f"expected {nch + 1} fields, got {len(row)}", line=line)
            vals = [_num(v, float, line, "sample") for v in row]
            if not all(np.isfinite(vals)):
                raise DataError("non-finite sample", line=line)
            t.append(vals[0])
            rows.append(vals[1:])
    if len(t) < 2:
        raise DataError("trace needs at least two samples to infer the rate")
    dt = np.diff(t)
    if np.any(dt <= 0):
        bad = int(np.flatnonzero(dt <= 0)[0]) + 3
        raise DataError("time column must increase", line=bad)
    rate = 1.0 / float(np.median(dt))
    return np.asarray(rows, dtype=np.float64).T, rate


def write_raw_traces(path, traces, rate_hz, lsb_v):
    """int16 little-endian, channel-interleaved; writes the ``.meta`` sidecar."""
    traces = np.atleast_2d(np.asarray(traces, dtype=np.float64))
    codes = np.clip(np.round(traces / lsb_v), -32768, 32767).astype("<i2")
    codes.T.tofile(path)
    with open(path + META_SUFFIX, "w", encoding="utf-8") as fh:
        fh.write(f"rate_hz={_fmt(rate_hz)}\nlsb_v={_fmt(lsb_v)}\nchannels={traces.shape[0]}\n")


def read_raw_meta(path):
    meta = {}
    with _open_read(path + META_SUFFIX) as fh:
        for i, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or key not in ("rate_hz", "lsb_v", "channels"):
                raise DataError(f"unexpected sidecar entry {line!r}", line=i)
            meta[key] = _num(value.strip(), int if key == "channels" else float, i, key)
    missing = {"rate_hz", "lsb_v", "channels"} - set(meta)
    if missing:
        raise DataError(f"sidecar lacks {', '.join(sorted(missing))}")
    if meta["channels"] < 1 or meta["rate_hz"] <= 0 or meta["lsb_v"] <= 0:
        raise DataError("sidecar values must be positive")
    return meta


def read_raw_traces(path):
    """Returns ``(traces (n_channels, n) volts, rate_hz)``."""
    meta = read_raw_meta(path)
    try:
        data = np.fromfile(path, dtype="<i2")
    except OSError as e:
        raise DataError(f"cannot read {path}: {e.strerror}") from None
    nch = meta["channels"]
    if data.size % nch:
        raise DataError(f"{data.size} samples do not divide into {nch} channels")
    return data.reshape(-1, nch).T.astype(np.float64) * meta["lsb_v"], meta["rate_hz"]


def read_traces(path, fmt=None):
    fmt = fmt or ("raw" if os.path.exists(path + META_SUFFIX) else "csv")
    return read_raw_traces(path) if fmt == "raw" else read_csv_traces(path)


# ----------------------------------------------------------------- records

def _write(path_or_fh, header, rows):
    own = isinstance(path_or_fh, (str, os.PathLike))
    fh = open(path_or_fh, "w", newline="", encoding="utf-8") if own else path_or_fh
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if own:
            fh.close()


def _read(path_or_text, header):
    if isinstance(path_or_text, io.StringIO):
        yield from _rows(path_or_text, header)
        return
    with _open_read(path_or_text) as fh:
        yield from _rows(fh, header)


def write_features(path, records):
    _write(path, FEATURE_HEADER, (
        [r.window_index, r.pair_or_ch, r.kind, r.value_q15, _fmt(r.value_float), int(r.flagged)]
        for r in records))


def read_features(path):
    out = []
    for line, row in _read(path, FEATURE_HEADER):
        w, ident, kind, q, _, flagged = row
        if kind not in ("PLV", "PAC", "SE"):
            raise DataError(f"unknown feature kind {kind!r}", line=line)
        out.append(FeatureWindowRecord(
            _num(w, int, line, "window"), _num(ident, int, line, "pair_or_ch"), kind,
            _num(q, int, line, "value_q15"), _num(flagged, int, line, "flagged") != 0))
    return out


def write_events(path, events):
    def opt(v):
        return "" if v is None else v
    _write(path, EVENT_HEADER, (
        [e.t_index, e.mode, opt(e.effective_target), opt(e.window_value), opt(e.pair),
         opt(e.target), e.channel, e.stim_channel] for e in events))


def read_events(path):
    out = []
    for line, row in _read(path, EVENT_HEADER):
        t, mode, eff, wv, pair, target, ch, stim_ch = row
        out.append(TriggerEvent(
            t_index=_num(t, int, line, "t_index"), mode=mode,
            effective_target=_opt_int(eff, line, "effective_target_code"),
            window_value=_opt_int(wv, line, "window_value"),
            channel=_num(ch, int, line, "channel"), pair=_opt_int(pair, line, "pair"),
            target=_opt_int(target, line, "target_code"),
            stim_channel=_num(stim_ch, int, line, "stim_channel")))
    return out


def write_phases(path, phases, envelopes):
    """Long format, one row per (decimated sample, channel)."""
    phases = np.asarray(phases)
    envelopes = np.asarray(envelopes)
    m, nch = phases.shape
    t = np.repeat(np.arange(m), nch)
    ch = np.tile(np.arange(nch), m)
    table = np.column_stack([t, ch, phases.ravel(), envelopes.ravel()])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(PHASE_HEADER) + "\n")
        np.savetxt(fh, table, fmt="%d", delimiter=",")


def read_phases(path):
    """Returns ``(phases, envelopes)`` shaped (m, n_channels)."""
    rows = [[_num(v, int, line, "field") for v in row] for line, row in _read(path, PHASE_HEADER)]
    if not rows:
        return np.zeros((0, 0), np.int64), np.zeros((0, 0), np.int64)
    a = np.asarray(rows, dtype=np.int64)
    nch = int(a[:, 1].max()) + 1
    if a.shape[0] % nch or np.any(a[:, 1] != np.tile(np.arange(nch), a.shape[0] // nch)):
        raise DataError("phase rows must list every channel for each t_index in order")
    return a[:, 2].reshape(-1, nch), a[:, 3].reshape(-1, nch)


def write_stim_trace(path, trace, t0_us=0.0):
    _write(path, STIM_HEADER, (
        [_fmt(t0_us + t), _fmt(i), _fmt(vo * 1e3), _fmt(vc * 1e3)]
        for t, i, vo, vc in zip(trace.t_us, trace.i_ua, trace.v_out, trace.v_cap)))


def read_stim_trace(path):
    """Returns a dict of float arrays keyed by the CSV columns."""
    rows = [[_num(v, float, line, "field") for v in row] for line, row in _read(path, STIM_HEADER)]
    a = np.asarray(rows, dtype=np.float64).reshape(-1, len(STIM_HEADER))
    return {k: a[:, i] for i, k in enumerate(STIM_HEADER)}
