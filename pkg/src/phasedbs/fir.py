"""Threefold FIR: decimate-by-4 lowpass, then a bandpass/quadrature pair.

The lowpass runs on the ADC stream and is evaluated only on every fourth
input sample. The band stage runs at the decimated rate as two parallel
banks sharing a delay line: an even-symmetric cosine-modulated bandpass
(``Re``) and its odd-symmetric sine-modulated twin (``Im``).
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, DesignError
from .fixedpoint import Q15_MAX, Q15_MIN, Q15_ONE, round_shift, saturate

DECIMATION = 4


@dataclass(frozen=True)
class BandConfig:
    f_lo_hz: float
    f_hi_hz: float
    f_center_hz: float = None

    def __post_init__(self):
        if self.f_center_hz is None:
            object.__setattr__(self, "f_center_hz", 0.5 * (self.f_lo_hz + self.f_hi_hz))

    def validate(self, decimated_rate_hz):
        nyq = decimated_rate_hz / 2
        if not 0 < self.f_lo_hz < self.f_hi_hz < nyq:
            raise ConfigError(f"band edges must satisfy 0 < f_lo < f_hi < {nyq} Hz, "
                              f"got {self.f_lo_hz}..{self.f_hi_hz}")
        if not self.f_lo_hz <= self.f_center_hz <= self.f_hi_hz:
            raise ConfigError("band centre must lie inside the band")


THETA = BandConfig(4.0, 8.0)


@dataclass(frozen=True)
class LpfSpec:
    taps: int = 33
    cutoff_hz: float = 250.0
    atten_db: float = 50.0


@dataclass
class FilterSet:
    lpf_taps: np.ndarray
    bpf_taps: np.ndarray
    ht_taps: np.ndarray
    group_delay_lpf: float
    group_delay_band: float
    input_rate_hz: float
    band: BandConfig
    decimation: int = DECIMATION
    lpf_atten_db: float = float("nan")

    @property
    def decimated_rate_hz(self):
        return self.input_rate_hz / self.decimation

    @property
    def group_delay_s(self):
        """Total pipeline delay: lowpass at the input rate plus band stage."""
        return (self.group_delay_lpf / self.input_rate_hz
                + self.group_delay_band / self.decimated_rate_hz)

    def to_json(self):
        doc = {
            "lpf_taps": [int(v) for v in self.lpf_taps],
            "bpf_taps": [int(v) for v in self.bpf_taps],
            "ht_taps": [int(v) for v in self.ht_taps],
            "group_delay_lpf": self.group_delay_lpf,
            "group_delay_band": self.group_delay_band,
            "input_rate_hz": self.input_rate_hz,
            "decimation": self.decimation,
            "band": asdict(self.band),
            "lpf_atten_db": round(float(self.lpf_atten_db), 3),
        }
        doc["sha256"] = _digest(doc)
        return doc

    def digest(self):
        return self.to_json()["sha256"]

    @classmethod
    def from_json(cls, doc):
        body = {k: v for k, v in doc.items() if k != "sha256"}
        if "sha256" in doc and _digest(body) != doc["sha256"]:
            raise ConfigError("filter set content hash mismatch")
        return cls(
            lpf_taps=np.asarray(doc["lpf_taps"], dtype=np.int64),
            bpf_taps=np.asarray(doc["bpf_taps"], dtype=np.int64),
            ht_taps=np.asarray(doc["ht_taps"], dtype=np.int64),
            group_delay_lpf=doc["group_delay_lpf"],
            group_delay_band=doc["group_delay_band"],
            input_rate_hz=doc["input_rate_hz"],
            decimation=doc.get("decimation", DECIMATION),
            band=BandConfig(**doc["band"]),
            lpf_atten_db=doc.get("lpf_atten_db", float("nan")),
        )


def _digest(doc):
    return hashlib.sha256(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def kaiser_beta(atten_db):
    """Kaiser's empirical window parameter for a stopband attenuation in dB."""
    a = float(atten_db)
    if a > 50:
        return 0.1102 * (a - 8.7)
    if a >= 21:
        return 0.5842 * (a - 21) ** 0.4 + 0.07886 * (a - 21)
    return 0.0


def _quantize(h):
    q = np.round(np.asarray(h) * Q15_ONE).astype(np.int64)
    if q.max() > Q15_MAX or q.min() < Q15_MIN:
        raise DesignError("coefficient outside Q1.15 range")
    return q


def amplitude(taps, f_hz, rate_hz):
    """|H(f)| of an FIR given integer or real taps (integer taps read as Q1.15)."""
    h = np.asarray(taps, dtype=np.float64)
    if np.issubdtype(np.asarray(taps).dtype, np.integer):
        h = h / Q15_ONE
    f = np.atleast_1d(np.asarray(f_hz, dtype=np.float64))
    k = np.arange(h.size)
    H = np.exp(-2j * np.pi * np.outer(f / rate_hz, k)) @ h
    return np.abs(H)


def response(taps, f_hz, rate_hz):
    """Complex frequency response, Q1.15 integer taps scaled to real."""
    h = np.asarray(taps, dtype=np.float64)
    if np.issubdtype(np.asarray(taps).dtype, np.integer):
        h = h / Q15_ONE
    f = np.atleast_1d(np.asarray(f_hz, dtype=np.float64))
    k = np.arange(h.size)
    return np.exp(-2j * np.pi * np.outer(f / rate_hz, k)) @ h


def design_lpf(spec, input_rate_hz, decimation=DECIMATION):
    """Kaiser-windowed sinc decimation lowpass, unity DC gain, Q1.15 taps."""
    if spec.taps < 3 or spec.taps % 2 == 0:
        raise ConfigError("lowpass tap count must be odd and >= 3")
    stop = input_rate_hz / (2 * decimation)
    if not 0 < spec.cutoff_hz < stop:
        raise ConfigError(f"lowpass cutoff must lie below the decimated Nyquist {stop} Hz")
    L = spec.taps
    u = np.arange(L) - (L - 1) / 2
    fc = spec.cutoff_hz / input_rate_hz
    h = 2 * fc * np.sinc(2 * fc * u) * np.kaiser(L, kaiser_beta(spec.atten_db))
    q = _quantize(h / h.sum())
    grid = np.linspace(stop, input_rate_hz / 2, 2048)
    achieved = -20 * np.log10(amplitude(q, grid, input_rate_hz).max() / amplitude(q, 0.0, input_rate_hz)[0])
    if achieved < spec.atten_db:
        raise DesignError(f"{L}-tap lowpass reaches only {achieved:.1f} dB above {stop:g} Hz "
                          f"(target {spec.atten_db:g} dB)", achieved_db=achieved)
    return q, achieved


def design_band_pair(band, rate_hz, taps, atten_db=50.0):
    """Analytic filter pair for ``band`` at ``rate_hz``.

    Both paths use the same Kaiser-windowed lowpass prototype of half-width
    ``(f_hi - f_lo)/2``, modulated by cosine (Re) and sine (Im) at the band
    centre. The windowed DC component is removed from Re so that its DC gain
    is exactly zero, and each path is scaled to unit gain at the centre.
    """
    if taps < 3 or taps % 2 == 0:
        raise ConfigError("band filter tap count must be odd and >= 3")
    band.validate(rate_hz)
    L = taps
    M = (L - 1) // 2
    u = np.arange(L) - M
    w = np.kaiser(L, kaiser_beta(atten_db))
    half_bw = (band.f_hi_hz - band.f_lo_hz) / 2 / rate_hz
    proto = w * 2 * half_bw * np.sinc(2 * half_bw * u)
    arg = 2 * np.pi * band.f_center_hz / rate_hz * u
    re = proto * np.cos(arg)
    re -= w * (re.sum() / w.sum())
    im = proto * np.sin(arg)
    g_re = np.sum(re * np.cos(arg))
    g_im = np.sum(im * np.sin(arg))
    if abs(g_re) < 1e-9 or abs(g_im) < 1e-9:
        raise DesignError("band pair has no gain at its centre frequency")
    re_q = _quantize(re / g_re)
    im_q = _quantize(im / g_im)
    re_q[M] -= re_q.sum()  # exact zero DC after rounding; keeps symmetry
    im_q[M] = 0
    return re_q, im_q


def design_filters(band, input_rate_hz=4000.0, lpf_spec=None, band_taps=55, band_atten_db=50.0):
    """Design the complete filter set for one channel.

    Default tap counts (33 at the input rate, 55 at the decimated rate) give
    a total pipeline delay of 16/4000 + 27/1000 s = 31 ms.
    """
    lpf_spec = lpf_spec or LpfSpec()
    if input_rate_hz <= 0:
        raise ConfigError("input rate must be positive")
    lpf, achieved = design_lpf(lpf_spec, input_rate_hz)
    dec_rate = input_rate_hz / DECIMATION
    bpf, ht = design_band_pair(band, dec_rate, band_taps, band_atten_db)
    return FilterSet(
        lpf_taps=lpf, bpf_taps=bpf, ht_taps=ht,
        group_delay_lpf=(lpf.size - 1) / 2,
        group_delay_band=(bpf.size - 1) / 2,
        input_rate_hz=float(input_rate_hz), band=band,
        lpf_atten_db=achieved,
    )


def mac_budget(filter_set, n_channels):
    """Multiply-accumulates per second on the shared chain and bank shift rates."""
    dec_rate = filter_set.decimated_rate_hz
    lpf = n_channels * filter_set.lpf_taps.size * dec_rate
    band = n_channels * (filter_set.bpf_taps.size + filter_set.ht_taps.size) * dec_rate
    return {
        "lpf_macs": lpf,
        "band_macs": band,
        "total_macs": lpf + band,
        "lpf_shift_rate_hz": filter_set.input_rate_hz,
        "band_shift_rate_hz": dec_rate,
    }


@dataclass(frozen=True)
class AnalyticSample:
    """One decimated output: the bandpass (Re-path) sample and the analytic pair."""

    t_index: int
    bp: int
    re: int
    im: int


@dataclass
class ChannelState:
    filters: FilterSet
    adc_bits: int = 10
    n_in: int = 0
    t_out: int = 0
    saturations: int = 0
    lpf_hist: np.ndarray = field(default=None, repr=False)
    band_hist: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.lpf_hist is None:
            self.lpf_hist = np.zeros(self.filters.lpf_taps.size - 1, dtype=np.int64)
        if self.band_hist is None:
            self.band_hist = np.zeros(self.filters.bpf_taps.size - 1, dtype=np.int64)

    @property
    def input_shift(self):
        return 16 - self.adc_bits

    def push(self, adc_code):
        """Sample-by-sample path in plain Python integers."""
        x = int(adc_code) << self.input_shift
        n = self.n_in
        self.n_in += 1
        newest_first = [x] + [int(v) for v in self.lpf_hist[::-1]]
        _shift_in(self.lpf_hist, x)
        if n % self.filters.decimation:
            return None
        y = self._mac(self.filters.lpf_taps, newest_first)
        ys = [y] + [int(v) for v in self.band_hist[::-1]]
        _shift_in(self.band_hist, y)
        re = self._mac(self.filters.bpf_taps, ys)
        im = self._mac(self.filters.ht_taps, ys)
        t = self.t_out
        self.t_out += 1
        return AnalyticSample(t, re, re, im)

    def _mac(self, taps, newest_first):
        acc = sum(int(c) * v for c, v in zip(taps, newest_first))
        acc = max(min(acc, (1 << 39) - 1), -(1 << 39))
        q = round_shift(acc, 15)
        out = saturate(q)
        if out != q:
            self.saturations += 1
        return out

    def process_block(self, codes):
        """Vectorised path, bit-exact with :meth:`push`.

        Returns ``(t_index, re, im)``.
        """
        x = np.asarray(codes, dtype=np.int64) << self.input_shift
        f = self.filters
        dec = f.decimation
        xpad = np.concatenate([self.lpf_hist, x])
        offset = (-self.n_in) % dec
        count = max(0, -(-(x.size - offset) // dec))
        y, s1 = kernels.fir_q15(xpad, f.lpf_taps, offset, dec, count)
        self.lpf_hist = xpad[xpad.size - self.lpf_hist.size:].copy()
        self.n_in += x.size
        ypad = np.concatenate([self.band_hist, y])
        re, s2 = kernels.fir_q15(ypad, f.bpf_taps, 0, 1, count)
        im, s3 = kernels.fir_q15(ypad, f.ht_taps, 0, 1, count)
        self.band_hist = ypad[ypad.size - self.band_hist.size:].copy()
        self.saturations += int(s1.sum() + s2.sum() + s3.sum())
        t = self.t_out + np.arange(count, dtype=np.int64)
        self.t_out += count
        return t, re, im


def _shift_in(hist, v):
    if hist.size:
        hist[:-1] = hist[1:]
        hist[-1] = v


def _pad_taps(taps, length):
    # zero taps on the oldest end leave every output unchanged
    return np.concatenate([taps, np.zeros(length - taps.size, dtype=np.int64)])


class FirPipeline:
    """All channels filtered together, one kernel call per stage.

    Channels share nothing but the sample clock; taps of different lengths
    are zero-padded to a common length, which does not change any output.
    Bit-exact with running a :class:`ChannelState` per channel.
    """

    def __init__(self, filter_sets, adc_bits=10):
        self.filter_sets = list(filter_sets)
        if not self.filter_sets:
            raise ConfigError("at least one channel is required")
        decs = {fs.decimation for fs in self.filter_sets}
        if len(decs) != 1:
            raise ConfigError("all channels must share one decimation factor")
        self.decimation = decs.pop()
        self.input_shift = 16 - adc_bits
        L = max(fs.lpf_taps.size for fs in self.filter_sets)
        Lb = max(fs.bpf_taps.size for fs in self.filter_sets)
        self.lpf_taps = np.stack([_pad_taps(fs.lpf_taps, L) for fs in self.filter_sets])
        self.bpf_taps = np.stack([_pad_taps(fs.bpf_taps, Lb) for fs in self.filter_sets])
        self.ht_taps = np.stack([_pad_taps(fs.ht_taps, Lb) for fs in self.filter_sets])
        nch = len(self.filter_sets)
        self.lpf_hist = np.zeros((nch, L - 1), dtype=np.int64)
        self.band_hist = np.zeros((nch, Lb - 1), dtype=np.int64)
        self.n_in = 0
        self.t_out = 0
        self.saturations = 0

    @classmethod
    def uniform(cls, filter_set, n_channels=16, adc_bits=10):
        return cls([filter_set] * n_channels, adc_bits)

    @property
    def n_channels(self):
        return len(self.filter_sets)

    def process_block(self, codes, detail=False):
        """``codes``: (n_samples, n_channels). Returns t (m,), re (m, ch), im (m, ch).

        With ``detail`` also returns the lowpass outputs (ch, m) and the
        per-output saturation count (m,) needed by :meth:`rewind`.
        """
        x = np.asarray(codes, dtype=np.int64).T << self.input_shift
        dec = self.decimation
        xpad = np.concatenate([self.lpf_hist, x], axis=1)
        offset = (-self.n_in) % dec
        count = max(0, -(-(x.shape[1] - offset) // dec))
        y, s1 = kernels.fir_q15(xpad, self.lpf_taps, offset, dec, count)
        self.lpf_hist = xpad[:, xpad.shape[1] - self.lpf_hist.shape[1]:].copy()
        self.n_in += x.shape[1]
        ypad = np.concatenate([self.band_hist, y], axis=1)
        re, s2 = kernels.fir_q15(ypad, self.bpf_taps, 0, 1, count)
        im, s3 = kernels.fir_q15(ypad, self.ht_taps, 0, 1, count)
        self.band_hist = ypad[:, ypad.shape[1] - self.band_hist.shape[1]:].copy()
        sat = (s1.astype(np.int64) + s2 + s3).sum(axis=0)
        self.saturations += int(sat.sum())
        t = self.t_out + np.arange(count, dtype=np.int64)
        self.t_out += count
        if detail:
            return t, re.T, im.T, y, sat
        return t, re.T, im.T

    def snapshot(self):
        return (self.n_in, self.t_out, self.saturations, self.lpf_hist.copy(), self.band_hist.copy())

    def rewind(self, snap, codes, y, sat, n_inputs, n_outputs):
        """Reset to ``snap`` advanced by the first ``n_inputs`` rows of ``codes``.

        ``y``/``sat`` come from the :meth:`process_block` call (with
        ``detail``) that consumed ``codes``; ``n_outputs`` of its outputs lie
        inside the kept prefix.
        """
        n_in, t_out, sats, lpf_hist, band_hist = snap
        x = np.asarray(codes[:n_inputs], dtype=np.int64).T << self.input_shift
        xpad = np.concatenate([lpf_hist, x], axis=1)
        self.lpf_hist = xpad[:, xpad.shape[1] - lpf_hist.shape[1]:].copy()
        ypad = np.concatenate([band_hist, y[:, :n_outputs]], axis=1)
        self.band_hist = ypad[:, ypad.shape[1] - band_hist.shape[1]:].copy()
        self.n_in = n_in + n_inputs
        self.t_out = t_out + n_outputs
        self.saturations = sats + int(np.sum(sat[:n_outputs]))


def process_sample(state, adc_code):
    """Feed one ADC code to a :class:`ChannelState`; returns an AnalyticSample every 4th call."""
    return state.push(adc_code)
