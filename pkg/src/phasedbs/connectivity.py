"""Windowed connectivity features with l-infinity magnitude approximation.

Every magnitude ``|(a, b)|`` in the fixed-point path is replaced by
``max(|a|, |b|)``, which underestimates the Euclidean norm by at most a
factor of sqrt(2). Trigonometric values come from a 256-entry quarter-wave
table with 9-bit amplitude (0..256).
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, DataError
from .fixedpoint import Q15_MAX, Q15_ONE, wrap_phase

MAX_PAIRS = 8
ACC_BITS = 48
PAC_MIN_MEAN_LSB = 16


@dataclass(frozen=True)
class TrigLut:
    quarter: np.ndarray

    def sin(self, codes):
        return kernels.trig_lookup(codes, self.quarter)[1]

    def cos(self, codes):
        return kernels.trig_lookup(codes, self.quarter)[0]


def build_trig_lut():
    i = np.arange(256)
    return TrigLut(np.round(256 * np.sin(2 * np.pi * i / 1024)).astype(np.int64))


_TRIG = None


def default_trig():
    global _TRIG
    if _TRIG is None:
        _TRIG = build_trig_lut()
    return _TRIG


@dataclass(frozen=True)
class PairSpec:
    id: int
    ch_a: int
    ch_b: int
    feature: str = "PLV"

    def __post_init__(self):
        if self.feature not in ("PLV", "PAC"):
            raise ConfigError(f"pair feature must be PLV or PAC, got {self.feature!r}")
        if not (0 <= self.ch_a < 16 and 0 <= self.ch_b < 16):
            raise ConfigError("pair channel ids must lie in [0, 15]")


@dataclass(frozen=True)
class PairConfig:
    pairs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        if len(self.pairs) > MAX_PAIRS:
            raise ConfigError(f"at most {MAX_PAIRS} channel pairs are supported")
        ids = [p.id for p in self.pairs]
        if len(set(ids)) != len(ids):
            raise ConfigError("pair ids must be unique")


@dataclass(frozen=True)
class WindowConfig:
    n_samples: int = 1024

    def __post_init__(self):
        n = self.n_samples
        if n < 1 or n & (n - 1) or n > 1 << 16:
            raise ConfigError("window length must be a power of two no larger than 65536")

    @property
    def hop(self):
        return self.n_samples

    @property
    def log2n(self):
        return self.n_samples.bit_length() - 1


@dataclass(frozen=True)
class FeatureWindowRecord:
    window_index: int
    pair_or_ch: int
    kind: str
    value_q15: int
    flagged: bool = False

    @property
    def value_float(self):
        return self.value_q15 / Q15_ONE


def _log2(n):
    if n < 1 or n & (n - 1):
        raise ConfigError(f"window length must be a power of two, got {n}")
    return n.bit_length() - 1


def envelope(re, im=None):
    """max(|re|, |im|), saturated to Q1.15. Accepts an AnalyticSample or arrays."""
    if im is None:
        re, im = re.re, re.im
    if np.ndim(re) == 0 and np.ndim(im) == 0:
        return min(max(abs(int(re)), abs(int(im))), Q15_MAX)
    e = np.maximum(np.abs(np.asarray(re, dtype=np.int64)), np.abs(np.asarray(im, dtype=np.int64)))
    return np.minimum(e, Q15_MAX)


def phase_difference(a, b):
    """Signed modular difference of phase codes."""
    return wrap_phase(np.asarray(a, dtype=np.int64) - np.asarray(b, dtype=np.int64))


def plv_sums(phases_a, phases_b, trig=None, valid=None):
    """``(sum cos(dc), sum sin(dc))`` over the last axis, table units (x256).

    Samples where ``valid`` is False (degenerate phases) contribute nothing.
    """
    trig = trig or default_trig()
    a = np.asarray(phases_a, dtype=np.int64)
    b = np.asarray(phases_b, dtype=np.int64)
    if a.shape != b.shape:
        raise DataError(f"phase windows differ in shape: {a.shape} vs {b.shape}")
    dc = phase_difference(a, b)
    w = np.ones_like(dc) if valid is None else np.asarray(valid, dtype=np.int64)
    return kernels.weighted_trig_sums(dc, w, trig.quarter)


def _linf_q15(sc, ss, n):
    """max(|S_c|, |S_s|) / (n * 256) rounded to Q1.15."""
    k = _log2(n)
    m = np.maximum(np.abs(sc), np.abs(ss))
    return np.minimum((m * 128 + (n >> 1)) >> k, Q15_MAX)


def plv_window(phases_a, phases_b, trig=None, valid=None):
    """Phase-locking value of one window (or a stack of windows on the last axis)."""
    n = np.shape(phases_a)[-1]
    sc, ss = plv_sums(phases_a, phases_b, trig, valid)
    v = _linf_q15(sc, ss, n)
    return int(v) if np.ndim(v) == 0 else v


def pac_sums(phases_low, envs_high, trig=None):
    trig = trig or default_trig()
    c = np.asarray(phases_low, dtype=np.int64)
    a = np.asarray(envs_high, dtype=np.int64)
    if c.shape != a.shape:
        raise DataError(f"phase and envelope windows differ in shape: {c.shape} vs {a.shape}")
    sc, ss = kernels.weighted_trig_sums(c, a, trig.quarter)
    return sc, ss, a.sum(axis=-1)


def pac_window(phases_low, envs_high, trig=None, return_flags=False):
    """Mean-vector phase-amplitude coupling: ``(raw, normalized)`` in Q1.15.

    ``raw`` is the l-inf magnitude of ``sum A e^{j phi}`` over ``N * 256``;
    ``normalized`` divides by ``sum A`` instead, so it lies in [0, 1]
    regardless of amplitude scale. A mean amplitude below 16 lsb is treated
    as degenerate: normalized is 0 and the flag is set.
    """
    n = np.shape(phases_low)[-1]
    k = _log2(n)
    sc, ss, total = pac_sums(phases_low, envs_high, trig)
    m = np.maximum(np.abs(sc), np.abs(ss))
    raw = np.minimum((m + (n << 7)) >> (8 + k), Q15_MAX)
    degenerate = (total >> k) < PAC_MIN_MEAN_LSB
    safe = np.where(degenerate, 1, total)
    norm = np.minimum((m * 256 + safe) // (2 * safe), Q15_MAX)
    norm = np.where(degenerate, 0, norm)
    if np.ndim(raw) == 0:
        raw, norm, degenerate = int(raw), int(norm), bool(degenerate)
    return (raw, norm, degenerate) if return_flags else (raw, norm)


def se_window(bp):
    """Mean square of the bandpass samples, Q1.15 of full-scale squared."""
    x = np.asarray(bp, dtype=np.int64)
    n = x.shape[-1]
    k = _log2(n)
    acc = (x * x).sum(axis=-1)
    v = np.minimum((acc + (1 << (14 + k))) >> (15 + k), Q15_MAX)
    return int(v) if np.ndim(v) == 0 else v


def linf_bounds(sc, ss, n):
    """(l-inf, Euclidean) feature values in double precision from the same sums."""
    sc = np.asarray(sc, dtype=np.float64)
    ss = np.asarray(ss, dtype=np.float64)
    return np.maximum(np.abs(sc), np.abs(ss)) / (n * 256.0), np.hypot(sc, ss) / (n * 256.0)


def ideal_features(traces, bands, pairs, n_window, rate_hz=4000.0, decimation=4, delay=0):
    """Double-precision reference features on the same decimated windows.

    ``traces`` is ``(n_channels, n)`` in volts at the input rate and ``bands``
    a per-channel list of :class:`BandConfig`. Ground truth comes from the
    zero-phase Butterworth + exact Hilbert oracle, sampled on the decimated
    clock and shifted by ``delay`` decimated samples so windows line up with
    a pipeline of that latency.

    Returns a dict with ``plv`` and ``pac`` arrays of shape (windows, pairs)
    (NaN where the pair is of the other kind) and ``se`` of shape
    (windows, channels).
    """
    from .oracle import oracle_analytic

    traces = np.asarray(traces, dtype=np.float64)
    used = sorted({c for p in pairs for c in (p.ch_a, p.ch_b)}) if pairs else list(range(traces.shape[0]))
    z = {}
    for ch in used:
        full = oracle_analytic(traces[ch], bands[ch], rate_hz)[::decimation]
        z[ch] = np.concatenate([np.zeros(delay, dtype=complex), full])[:full.size]
    n_dec = min(v.size for v in z.values())
    W = n_dec // n_window
    cut = W * n_window
    plv = np.full((W, len(pairs)), np.nan)
    pac = np.full((W, len(pairs)), np.nan)
    for j, p in enumerate(pairs):
        za = z[p.ch_a][:cut].reshape(W, n_window)
        zb = z[p.ch_b][:cut].reshape(W, n_window)
        if p.feature == "PLV":
            d = np.angle(za) - np.angle(zb)
            plv[:, j] = np.abs(np.exp(1j * d).mean(axis=1))
        else:
            amp = np.abs(zb)
            pac[:, j] = np.abs((amp * np.exp(1j * np.angle(za))).sum(axis=1)) / amp.sum(axis=1)
    se = np.full((W, traces.shape[0]), np.nan)
    for ch in used:
        se[:, ch] = (z[ch][:cut].real.reshape(W, n_window) ** 2).mean(axis=1)
    return {"plv": plv, "pac": pac, "se": se}
