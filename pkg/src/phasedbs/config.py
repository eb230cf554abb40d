"""Strict JSON run configuration.

One JSON document configures every subcommand. Unknown keys are rejected
and errors carry the line of the offending key where it can be located.
"""

import dataclasses
import hashlib
import json
import re
from dataclasses import dataclass, field

from .connectivity import PairConfig, PairSpec, WindowConfig
from .errors import ConfigError
from .fir import THETA, BandConfig, LpfSpec, design_filters
from .signals import CoupledParams, FrontendConfig
from .stim_control import StimConfig
from .stim_model import ElectrodeState, StimPulseParams


@dataclass(frozen=True)
class FilterConfig:
    band: BandConfig = THETA
    band_overrides: dict = field(default_factory=dict)
    lpf_taps: int = 33
    lpf_cutoff_hz: float = 250.0
    lpf_atten_db: float = 50.0
    band_taps: int = 55
    band_atten_db: float = 50.0

    def lpf_spec(self):
        return LpfSpec(self.lpf_taps, self.lpf_cutoff_hz, self.lpf_atten_db)

    def band_for(self, ch):
        return self.band_overrides.get(ch, self.band)


@dataclass(frozen=True)
class GeneratorConfig:
    """Synthetic input. ``sine-pink`` drives ``channels`` with the same trace;
    pair kinds drive ``channels[0]``/``channels[1]``; ``zeros`` is silence."""

    kind: str = "sine-pink"
    channels: tuple = (0,)
    duration_s: float = 10.0
    amp_pp_v: float = 2e-3
    freq_hz: float = 6.0
    pink_rms_v: float = 0.0
    pair: CoupledParams = None

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        kinds = ("sine-pink", "zeros", "plv-locked", "pac-coupled", "independent")
        if self.kind not in kinds:
            raise ConfigError(f"generator kind must be one of {kinds}")
        if self.kind in kinds[2:] and len(self.channels) != 2:
            raise ConfigError("pair generators need exactly two channels")


@dataclass(frozen=True)
class InputConfig:
    path: str = None
    format: str = "csv"
    generator: GeneratorConfig = None

    def __post_init__(self):
        if self.format not in ("csv", "raw"):
            raise ConfigError("input format must be csv or raw")
        if (self.path is None) == (self.generator is None):
            raise ConfigError("input needs exactly one of path or generator")


@dataclass(frozen=True)
class ChargeBalanceConfig:
    enabled: bool = True
    width_mismatch: float = 0.5
    n_pulses: int = 40
    interval_us: int = 166667
    tick_us: float = 1.0


@dataclass(frozen=True)
class PhaseErrorConfig:
    duration_s: float = 60.0
    amp_pp_v: float = 2e-3
    freq_hz: float = 6.0
    pink_rms_v: float = 0.0
    noise_levels: tuple = (0.0, 1.0, 2.0, 3.0)
    noise_fullscale_vpp: float = 24.0


@dataclass(frozen=True)
class CorrelateConfig:
    n_windows: int = 200
    n_controls: int = 20
    plv_jitter_rad: tuple = (0.0, 3.141592653589793)
    pac_coupling: tuple = (0.0, 1.0)
    noise_rms_v: float = 0.0


@dataclass(frozen=True)
class BenchConfig:
    bits: int = 10
    repeats: int = 3
    throughput_seconds: float = 10.0


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    frontend: FrontendConfig = FrontendConfig()
    filters: FilterConfig = FilterConfig()
    window: WindowConfig = WindowConfig()
    pairs: PairConfig = PairConfig()
    stim: tuple = ()
    pulse: StimPulseParams = StimPulseParams()
    electrode: ElectrodeState = ElectrodeState()
    charge_balance: ChargeBalanceConfig = ChargeBalanceConfig()
    input: InputConfig = InputConfig(generator=GeneratorConfig())
    blanking: tuple = ()
    write_phases: bool = True
    phase_error: PhaseErrorConfig = PhaseErrorConfig()
    correlate: CorrelateConfig = CorrelateConfig()
    bench: BenchConfig = BenchConfig()

    def __post_init__(self):
        n = self.frontend.n_channels
        dec_rate = self.frontend.per_channel_rate_hz / 4
        for ch, band in self.filters.band_overrides.items():
            if not 0 <= ch < n:
                raise ConfigError(f"band override for channel {ch} beyond {n - 1}")
        for ch in range(n):
            self.filters.band_for(ch).validate(dec_rate)
        for p in self.pairs.pairs:
            if max(p.ch_a, p.ch_b) >= n:
                raise ConfigError(f"pair {p.id} references a channel beyond {n - 1}")
        for s in self.stim:
            if not (0 <= s.monitor_channel < n):
                raise ConfigError(f"stim monitor channel {s.monitor_channel} beyond {n - 1}")
            if abs(s.rate_hz - dec_rate) > 1e-9:
                raise ConfigError(f"stim rate_hz {s.rate_hz} must equal the decimated rate {dec_rate}")
        if self.input is not None and self.input.generator is not None:
            if any(c >= n for c in self.input.generator.channels):
                raise ConfigError("generator channel beyond the front-end channel count")

    def with_seed(self, seed):
        return dataclasses.replace(
            self, seed=int(seed), frontend=dataclasses.replace(self.frontend, seed=int(seed)))

    def filter_sets(self):
        """One FilterSet per channel; identical bands share one design."""
        cache = {}
        out = []
        for ch in range(self.frontend.n_channels):
            band = self.filters.band_for(ch)
            if band not in cache:
                cache[band] = design_filters(
                    band, self.frontend.per_channel_rate_hz, self.filters.lpf_spec(),
                    self.filters.band_taps, self.filters.band_atten_db)
            out.append(cache[band])
        return out

    def bands(self):
        return [self.filters.band_for(ch) for ch in range(self.frontend.n_channels)]


# ---------------------------------------------------------------- parsing

def _line_of(text, key):
    if text is None:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _fail(msg, text=None, key=None):
    line = _line_of(text, key) if key else None
    prefix = f"line {line}: " if line else ""
    return ConfigError(prefix + msg)


def _build(cls, data, where, text, nested=None):
    nested = nested or {}
    if not isinstance(data, dict):
        raise _fail(f"{where}: expected an object", text, where.rsplit(".", 1)[-1])
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise _fail(f"unknown key {where}.{key}", text, key)
    defaults = {f.name: None if f.type in (object, "object") else f.default
                for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key in nested:
            value = nested[key](value, f"{where}.{key}", text)
        else:
            _check_type(defaults[key], value, f"{where}.{key}", text, key)
            if isinstance(value, list):
                value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError as e:
        line = _line_of(text, next(iter(data), "")) if data else None
        raise ConfigError((f"line {line}: " if line else "") + f"{where}: {e}") from None
    except (TypeError, ValueError) as e:
        raise _fail(f"{where}: {e}", text, next(iter(data), "")) from None


def _check_type(default, value, where, text, key):
    if default is None or default is dataclasses.MISSING or value is None:
        return
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, tuple):
        ok = isinstance(value, list)
    else:
        ok = True
    if not ok:
        raise _fail(f"{where}: expected {type(default).__name__}, got {type(value).__name__}", text, key)


def _band(v, where, text):
    return _build(BandConfig, v, where, text)


def _overrides(v, where, text):
    if not isinstance(v, dict):
        raise _fail(f"{where}: expected an object keyed by channel id", text, "band_overrides")
    out = {}
    for k, b in v.items():
        try:
            ch = int(k)
        except ValueError:
            raise _fail(f"{where}: channel key {k!r} is not an integer", text, k) from None
        out[ch] = _band(b, f"{where}.{k}", text)
    return out


def _pairs(v, where, text):
    if not isinstance(v, list):
        raise _fail(f"{where}: expected a list", text, "pairs")
    specs = [_build(PairSpec, p, f"{where}[{i}]", text) for i, p in enumerate(v)]
    try:
        return PairConfig(tuple(specs))
    except ConfigError as e:
        raise _fail(f"{where}: {e}", text, "pairs") from None


def _stims(v, where, text):
    if isinstance(v, dict):
        v = [v]
    if not isinstance(v, list):
        raise _fail(f"{where}: expected a list", text, "stim")
    return tuple(_build(StimConfig, s, f"{where}[{i}]", text) for i, s in enumerate(v))


def _generator(v, where, text):
    return _build(GeneratorConfig, v, where, text,
                  {"pair": lambda p, w, t: _build(CoupledParams, p, w, t)})


def _blanking(v, where, text):
    try:
        return tuple((int(s), int(d)) for s, d in v)
    except (TypeError, ValueError):
        raise _fail(f"{where}: expected a list of [start, duration] pairs", text, "blanking") from None


_TOP = {
    "frontend": lambda v, w, t: _build(FrontendConfig, v, w, t),
    "filters": lambda v, w, t: _build(FilterConfig, v, w, t, {"band": _band, "band_overrides": _overrides}),
    "window": lambda v, w, t: _build(WindowConfig, v, w, t),
    "pairs": _pairs,
    "stim": _stims,
    "pulse": lambda v, w, t: _build(StimPulseParams, v, w, t),
    "electrode": lambda v, w, t: _build(ElectrodeState, v, w, t),
    "charge_balance": lambda v, w, t: _build(ChargeBalanceConfig, v, w, t),
    "input": lambda v, w, t: _build(InputConfig, v, w, t, {"generator": _generator}),
    "blanking": _blanking,
    "phase_error": lambda v, w, t: _build(PhaseErrorConfig, v, w, t),
    "correlate": lambda v, w, t: _build(CorrelateConfig, v, w, t),
    "bench": lambda v, w, t: _build(BenchConfig, v, w, t),
}


def parse_config(text):
    """Parse a JSON document into a :class:`RunConfig`."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"line {e.lineno}: invalid JSON: {e.msg}") from None
    cfg = _build(RunConfig, data, "config", text, _TOP)
    if "frontend" not in data or "seed" not in data.get("frontend", {}):
        cfg = cfg.with_seed(cfg.seed)
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    return parse_config(text)


def config_digest(cfg):
    """Stable hash of the effective configuration."""
    doc = json.dumps(_plain(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(doc.encode()).hexdigest()


def _plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj
