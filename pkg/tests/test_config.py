import json

import pytest

from phasedbs.config import RunConfig, config_digest, load_config, parse_config
from phasedbs.errors import ConfigError


def test_defaults():
    cfg = parse_config("{}")
    assert cfg == RunConfig()
    assert cfg.frontend.n_channels == 16
    fsets = cfg.filter_sets()
    assert len(fsets) == 16
    assert fsets[0] is fsets[5]  # identical bands share one design


def test_full_document():
    text = json.dumps({
        "seed": 5,
        "frontend": {"gain_db": 55.0},
        "filters": {"band": {"f_lo_hz": 4, "f_hi_hz": 8}, "band_overrides": {"3": {"f_lo_hz": 13, "f_hi_hz": 30}}},
        "pairs": [{"id": 0, "ch_a": 0, "ch_b": 1, "feature": "PAC"}],
        "stim": {"mode": "Combined", "window_kind": "PAC", "window_id": 0},
        "input": {"generator": {"kind": "pac-coupled", "channels": [0, 1], "pair": {"coupling": [0, 1]}}},
        "blanking": [[100, 8]],
    }, indent=1)
    cfg = parse_config(text)
    assert cfg.seed == 5 and cfg.frontend.seed == 5
    assert cfg.filters.band_for(3).f_hi_hz == 30
    assert cfg.stim[0].mode == "Combined"
    assert cfg.input.generator.pair.coupling == (0, 1)
    assert cfg.blanking == ((100, 8),)
    assert cfg.filter_sets()[3].band.f_lo_hz == 13


@pytest.mark.parametrize("text,line,fragment", [
    ('{\n "seed": 1,\n "sed": 2\n}', 3, "unknown key config.sed"),
    ('{\n "frontend": {\n  "gain_db": "high"\n }\n}', 3, "expected float"),
    ('{\n "stim": [\n  {"mode": "Burst"}\n ]\n}', 3, "unknown stimulation mode"),
    ('{\n "pairs": [{"id": 0, "ch_a": 0, "ch_b": 16}]\n}', 2, "channel"),
    ('{\n "seed": 1,\n', 3, "invalid JSON"),
    ('{\n "frontend": {"gain_db": 70.0}\n}', 2, "53-61 dB"),
    ('{\n "window": {\n   "n_samples": 1000}}', 3, "power of two"),
])
def test_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ConfigError) as e:
        parse_config(text)
    msg = str(e.value)
    assert msg.startswith(f"line {line}:"), msg
    assert fragment in msg


def test_cross_field_validation():
    with pytest.raises(ConfigError, match="stim rate"):
        parse_config('{"stim": [{"rate_hz": 500.0}]}')
    with pytest.raises(ConfigError, match="band override"):
        parse_config('{"filters": {"band_overrides": {"20": {"f_lo_hz": 4, "f_hi_hz": 8}}}}')
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config('{"input": {"path": "x.csv", "generator": {}}}')


def test_seed_override_and_digest():
    a = RunConfig()
    b = a.with_seed(2 ** 64 - 1)
    assert b.frontend.seed == 2 ** 64 - 1
    assert config_digest(a) == config_digest(RunConfig())
    assert config_digest(a) != config_digest(b)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "none.json")
    p = tmp_path / "c.json"
    p.write_text('{"seed": 3}')
    assert load_config(p).seed == 3
