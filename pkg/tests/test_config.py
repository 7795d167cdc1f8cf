from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latticewave.config import ConfigError, RunConfig, RunOptions, canonical_config, parse_config, parse_text, serialize
from latticewave.model import ModelParams, basic_reproduction_number

CANONICAL_FILE = Path(__file__).resolve().parents[1] / "configs" / "canonical.cfg"

BASE = """lambda = 1
beta1 = 0.3
beta2 = 0.1
alpha = 0.2
mu = 0.1
gamma = 0.3
gamma1 = 0.1
"""


def test_canonical_file():
    cfg = parse_config(CANONICAL_FILE)
    assert cfg.params == ModelParams.canonical()
    assert basic_reproduction_number(cfg.params) == pytest.approx(10 / 3, rel=1e-14)
    assert cfg.options == RunOptions()
    assert canonical_config() == cfg


def test_defaults_documented():
    o = RunOptions()
    assert (o.B, o.h, o.tol, o.max_iter, o.N, o.dt, o.T, o.theta) == (30.0, 0.01, 1e-10, 500, 600, 0.01, 400.0, None)


def test_d_defaults_to_one():
    assert parse_text(BASE).params.d == 1.0


def _error(text):
    with pytest.raises(ConfigError) as exc:
        parse_text(text, "run.cfg")
    return exc.value


def test_out_of_range_names_key_and_line():
    e = _error(BASE.replace("beta1 = 0.3", "beta1 = -1"))
    assert e.line == 2
    assert "beta1" in str(e) and "out of range" in str(e) and str(e).startswith("run.cfg:2:")


def test_unknown_key():
    e = _error(BASE.replace("beta1", "betta1"))
    assert e.line == 2 and "unknown key 'betta1'" in str(e)


@pytest.mark.parametrize(
    "extra, line, fragment",
    [
        ("just words", 8, "malformed"),
        ("d =", 8, "malformed"),
        ("mu = 0.2", 8, "duplicate"),
        ("d = abc", 8, "not a number"),
        ("d = 0", 8, "out of range"),
        ("d = nan", 8, "finite"),
        ("N = 2.5", 8, "expected int"),
        ("h = 0.03", 8, "1/h"),
        ("dt = -1", 8, "out of range"),
        ("theta = inf", 8, "finite"),
    ],
)
def test_bad_lines(extra, line, fragment):
    e = _error(BASE + extra + "\n")
    assert fragment in str(e)
    if line is not None:
        assert e.line == line


def test_missing_key_and_missing_file(tmp_path):
    e = _error("\n".join(BASE.splitlines()[1:]))
    assert "missing" in str(e) and "lambda" in str(e)
    with pytest.raises(ConfigError, match="not found"):
        parse_config(tmp_path / "nope.cfg")


def test_cross_field_validation_reported():
    e = _error(BASE.replace("beta1 = 0.3", "beta1 = 0").replace("beta2 = 0.1", "beta2 = 0"))
    assert "run.cfg" in str(e)


def test_comments_and_blank_lines():
    text = "# header\n\n" + BASE.replace("mu = 0.1", "mu = 0.1   # death") + "T = 50\n"
    cfg = parse_text(text)
    assert cfg.params.mu == 0.1 and cfg.options.T == 50.0 and cfg.given == ("T",)


def test_round_trip_byte_identical():
    cfg = parse_config(CANONICAL_FILE).with_options(N=120, theta=0.25, B=20.0)
    text = serialize(cfg)
    again = parse_text(text)
    assert again == cfg
    assert serialize(again) == text


@settings(max_examples=100, deadline=None)
@given(
    vals=st.lists(st.floats(0.001, 10.0), min_size=8, max_size=8),
    N=st.integers(1, 10_000),
    T=st.floats(1e-3, 1e4),
)
def test_round_trip_property(vals, N, T):
    cfg = RunConfig(ModelParams(*vals)).with_options(N=N, T=T)
    text = serialize(cfg)
    assert parse_text(text) == cfg
    assert serialize(parse_text(text)) == text
