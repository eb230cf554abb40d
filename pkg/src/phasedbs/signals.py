"""Synthetic LFP sources and a behavioural model of the 16-channel front-end.

The front-end model applies a static per-channel gain (with mismatch drawn
once per run), white input-referred noise, 10-bit quantisation with clamping,
and stimulation blanking (code forced to 0).
"""

import bisect
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .errors import ConfigError, DataError

N_CHANNELS = 16

# Pinking cascade corner frequencies (Hz). Six real poles spaced 0.6 decade
# apart, each followed by a zero half a spacing higher, give an average
# -10 dB/decade slope between ~0.5 Hz and ~1 kHz. Grouped pairwise into
# three biquads and mapped to z by pole/zero matching at the output rate.
PINK_POLES_HZ = (0.5, 1.9905, 7.9245, 31.548, 125.6, 500.0)
PINK_ZEROS_HZ = (0.99763, 3.9716, 15.811, 62.946, 250.6, 997.63)
PINK_WARMUP_S = 4.0


@dataclass(frozen=True)
class FrontendConfig:
    gain_db: float = 53.0
    mismatch_sigma_rel: float = 0.0
    irn_uvrms: float = 0.0
    adc_bits: int = 10
    adc_fullscale_vpp: float = 1.2
    per_channel_rate_hz: float = 4000.0
    scan_order: tuple = tuple(range(N_CHANNELS))
    seed: int = 0
    chip_gain_range: bool = True

    def __post_init__(self):
        object.__setattr__(self, "scan_order", tuple(int(c) for c in self.scan_order))
        if self.adc_bits < 2 or self.adc_bits > 16:
            raise ConfigError("adc_bits must lie in [2, 16]")
        if self.per_channel_rate_hz <= 0:
            raise ConfigError("per_channel_rate_hz must be positive")
        if sorted(self.scan_order) != list(range(len(self.scan_order))):
            raise ConfigError("scan_order must be a permutation of channel ids")
        if self.chip_gain_range and not 53 <= self.gain_db <= 61:
            raise ConfigError("gain_db must lie in the chip's 53-61 dB range")
        if self.adc_fullscale_vpp <= 0 or self.mismatch_sigma_rel < 0 or self.irn_uvrms < 0:
            raise ConfigError("fullscale must be positive; mismatch and noise non-negative")

    @property
    def n_channels(self):
        return len(self.scan_order)

    @property
    def gain_linear(self):
        return 10 ** (self.gain_db / 20)

    @property
    def lsb_v(self):
        return self.adc_fullscale_vpp / (1 << self.adc_bits)

    @property
    def code_min(self):
        return -(1 << (self.adc_bits - 1))

    @property
    def code_max(self):
        return (1 << (self.adc_bits - 1)) - 1


@dataclass(frozen=True)
class RawSampleFrame:
    t_index: int
    codes: tuple
    scan_order: tuple = field(default=tuple(range(N_CHANNELS)), repr=False)


@dataclass
class BlankingSchedule:
    """Sorted, non-overlapping ``(start, duration)`` intervals at the input rate."""

    intervals: list = field(default_factory=list)

    def __post_init__(self):
        self.intervals = [(int(s), int(d)) for s, d in self.intervals]
        end = None
        for s, d in self.intervals:
            if d < 0 or (end is not None and s < end):
                raise ConfigError("blanking intervals must be sorted and non-overlapping")
            end = s + d

    def append(self, start, duration):
        if duration <= 0:
            return
        if self.intervals:
            s, d = self.intervals[-1]
            if start < s + d:
                raise ConfigError("blanking interval overlaps the previous one")
        self.intervals.append((int(start), int(duration)))

    def merge(self, start, duration):
        """Like :meth:`append` but extends the last interval on overlap."""
        if duration > 0 and self.intervals:
            s, d = self.intervals[-1]
            if start < s:
                raise ConfigError("blanking intervals must be added in order")
            if start <= s + d:
                self.intervals[-1] = (s, max(d, int(start) + int(duration) - s))
                return
        self.append(start, duration)

    def mask(self, n, offset=0):
        """Boolean mask of blanked samples for input indices ``offset..offset+n-1``."""
        m = np.zeros(n, dtype=bool)
        first = max(bisect.bisect_right(self.intervals, (offset, 1 << 62)) - 1, 0)
        for s, d in self.intervals[first:]:
            if s >= offset + n:
                break
            lo = max(s - offset, 0)
            hi = min(s + d - offset, n)
            if hi > lo:
                m[lo:hi] = True
        return m

    @property
    def total(self):
        return sum(d for _, d in self.intervals)


def _check_rate(rate_hz, duration_s, freq_hz=None):
    if rate_hz <= 0 or duration_s <= 0:
        raise ConfigError("rate and duration must be positive")
    if freq_hz is not None and rate_hz < 4 * freq_hz:
        raise ConfigError("sampling rate must be at least 4x the tone frequency")


def pinking_sos(rate_hz):
    """Second-order sections of the pinking cascade at ``rate_hz``."""
    sos = []
    for k in range(0, 6, 2):
        zs = [np.exp(-2 * np.pi * f / rate_hz) for f in PINK_ZEROS_HZ[k:k + 2]]
        ps = [np.exp(-2 * np.pi * f / rate_hz) for f in PINK_POLES_HZ[k:k + 2]]
        b = np.poly(zs)
        a = np.poly(ps)
        sos.append(np.concatenate([b, a]))
    return np.array(sos)


def pink_noise(n, rate_hz, rms_v, rng):
    """Gaussian 1/f noise: white noise through the pinking cascade, scaled to ``rms_v``."""
    warm = int(PINK_WARMUP_S * rate_hz)
    white = rng.standard_normal(n + warm)
    x = sps.sosfilt(pinking_sos(rate_hz), white)[warm:]
    x -= x.mean()
    std = x.std()
    return x * (rms_v / std) if std > 0 else x


def gen_sine_pink(amp_pp_v, freq_hz, pink_rms_v, duration_s, rate_hz=4000.0, seed=0, phase0=0.0):
    """Sine of ``amp_pp_v`` peak-to-peak plus pink noise of rms ``pink_rms_v``."""
    _check_rate(rate_hz, duration_s, freq_hz)
    if amp_pp_v < 0 or pink_rms_v < 0:
        raise ConfigError("amplitudes must be non-negative")
    n = int(round(duration_s * rate_hz))
    t = np.arange(n) / rate_hz
    x = 0.5 * amp_pp_v * np.sin(2 * np.pi * freq_hz * t + phase0)
    if pink_rms_v > 0:
        x = x + pink_noise(n, rate_hz, pink_rms_v, np.random.default_rng(seed))
    return x


def _ramp(value, n):
    if np.ndim(value) == 0:
        return np.full(n, float(value))
    lo, hi = value
    return np.linspace(lo, hi, n)


def _slow_noise(n, rate_hz, bw_hz, rng):
    """Unit-variance Gaussian process band-limited to ``bw_hz``."""
    sos = sps.butter(2, bw_hz, fs=rate_hz, output="sos")
    warm = int(4 * rate_hz / bw_hz)
    x = sps.sosfilt(sos, rng.standard_normal(n + warm))[warm:]
    return x / x.std()


@dataclass(frozen=True)
class CoupledParams:
    """Parameters for :func:`gen_coupled_pair`.

    ``jitter_rad`` and ``coupling`` take a scalar or a ``(start, end)`` pair
    that is ramped linearly across the trace.
    """

    duration_s: float = 10.0
    rate_hz: float = 4000.0
    amp_v: float = 1e-3
    f_low_hz: float = 6.0
    f_high_hz: float = 80.0
    high_amp_v: float = 0.25e-3
    lag_rad: float = 0.0
    jitter_rad: object = 0.0
    jitter_bw_hz: float = 0.5
    coupling: object = 1.0
    noise_rms_v: float = 0.0


KINDS = ("plv-locked", "pac-coupled", "independent")


def gen_coupled_pair(kind, params=None, seed=0):
    """Two-channel test trace, shape ``(2, n)`` in volts."""
    p = params or CoupledParams()
    if kind not in KINDS:
        raise ConfigError(f"unknown pair kind {kind!r}; expected one of {KINDS}")
    _check_rate(p.rate_hz, p.duration_s, max(p.f_low_hz, p.f_high_hz if kind == "pac-coupled" else 0))
    rng = np.random.default_rng(seed)
    n = int(round(p.duration_s * p.rate_hz))
    t = np.arange(n) / p.rate_hz
    phi = 2 * np.pi * p.f_low_hz * t + rng.uniform(-np.pi, np.pi)
    if kind == "plv-locked":
        jitter = _ramp(p.jitter_rad, n)
        if np.any(jitter > 0):
            jitter = jitter * _slow_noise(n, p.rate_hz, p.jitter_bw_hz, rng)
        a = p.amp_v * np.cos(phi)
        b = p.amp_v * np.cos(phi - p.lag_rad - jitter)
    elif kind == "pac-coupled":
        m = _ramp(p.coupling, n)
        phi_hi = 2 * np.pi * p.f_high_hz * t + rng.uniform(-np.pi, np.pi)
        a = p.amp_v * np.cos(phi)
        b = p.high_amp_v * (1 + m * np.cos(phi)) * np.cos(phi_hi)
    else:
        a = p.amp_v * rng.standard_normal(n)
        b = p.amp_v * rng.standard_normal(n)
    out = np.stack([a, b])
    if p.noise_rms_v > 0:
        out = out + p.noise_rms_v * rng.standard_normal(out.shape)
    return out


def channel_gains(cfg):
    """Static linear gains per channel, drawn once from N(g, (sigma*g)^2)."""
    g = cfg.gain_linear
    rng = np.random.default_rng([cfg.seed, 0])
    return g + cfg.mismatch_sigma_rel * g * rng.standard_normal(cfg.n_channels)


def afe_digitize(traces, cfg=None, blanking=None):
    """Digitise per-channel voltage traces, returning codes of shape ``(n, n_channels)``.

    ``traces`` is ``(n_channels, n)``; fewer rows than channels are padded
    with zero input.
    """
    cfg = cfg or FrontendConfig()
    rows = [np.asarray(tr, dtype=np.float64) for tr in traces]
    if len(rows) > cfg.n_channels:
        raise DataError(f"{len(rows)} traces for a {cfg.n_channels}-channel front-end")
    lengths = {r.size for r in rows}
    if len(lengths) > 1:
        raise DataError(f"trace length mismatch across channels: {sorted(lengths)}")
    n = lengths.pop() if lengths else 0
    v = np.zeros((cfg.n_channels, n))
    for i, r in enumerate(rows):
        v[i] = r
    if cfg.irn_uvrms > 0:
        rng = np.random.default_rng([cfg.seed, 1])
        v = v + cfg.irn_uvrms * 1e-6 * rng.standard_normal(v.shape)
    gains = channel_gains(cfg)
    codes = np.round(gains[:, None] * v / cfg.lsb_v)
    codes = np.clip(codes, cfg.code_min, cfg.code_max).astype(np.int64).T
    if blanking is not None and blanking.intervals:
        codes[blanking.mask(n)] = 0
    return codes


def count_clipped(codes, cfg):
    codes = np.asarray(codes)
    return int(np.count_nonzero((codes <= cfg.code_min) | (codes >= cfg.code_max)))


def frames(codes, cfg=None):
    """Iterate digitised codes as :class:`RawSampleFrame` records."""
    cfg = cfg or FrontendConfig()
    for t, row in enumerate(np.asarray(codes)):
        yield RawSampleFrame(t, tuple(int(c) for c in row), cfg.scan_order)
