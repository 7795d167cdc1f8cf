"""Plain-text run configuration: one ``key = value`` per line, ``#`` comments.

Model keys: lambda, beta1, beta2, alpha, mu, gamma, gamma1 (required) and
d (default 1).  Optional run options: B, h, tol, max_iter, N, dt, T, theta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

from .errors import LatticeWaveError
from .model import PARAM_KEYS, ModelParams

POSITIVE_MODEL_KEYS = ("lambda", "mu", "d")


class ConfigError(LatticeWaveError):
    def __init__(self, message, line: Optional[int] = None, path=None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.line = line


@dataclass(frozen=True)
class RunOptions:
    B: float = 30.0
    h: float = 0.01
    tol: float = 1e-10
    max_iter: int = 500
    N: int = 600
    dt: float = 0.01
    T: float = 400.0
    theta: Optional[float] = None  # None means I*/2


OPTION_TYPES = {f.name: (int if f.name in ("max_iter", "N") else float) for f in fields(RunOptions)}


def check_option(name: str, value) -> Optional[str]:
    if name == "max_iter" and value < 1:
        return "max_iter must be >= 1"
    if name == "N" and value < 1:
        return "N must be >= 1"
    if name in ("B", "h", "tol", "dt", "T", "theta") and not value > 0:
        return f"{name} must be > 0"
    if name == "h" and abs(1.0 / value - round(1.0 / value)) > 1e-9:
        return "h must divide 1 (1/h integral)"
    return None


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    options: RunOptions = RunOptions()
    given: tuple = ()  # option names set explicitly, in file order

    def with_options(self, **changes) -> "RunConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        given = self.given + tuple(k for k in changes if k not in self.given)
        return RunConfig(self.params, replace(self.options, **changes), given)


def _format_value(v) -> str:
    return str(v) if isinstance(v, int) else repr(float(v))


def serialize(cfg: RunConfig) -> str:
    """Canonical text form; ``parse_text(serialize(cfg)) == cfg``."""
    lines = []
    for key, attr in PARAM_KEYS.items():
        lines.append(f"{key} = {_format_value(getattr(cfg.params, attr))}")
    for name in cfg.given:
        lines.append(f"{name} = {_format_value(getattr(cfg.options, name))}")
    return "\n".join(lines) + "\n"


def parse_text(text: str, path=None) -> RunConfig:
    model: dict[str, float] = {}
    opts: dict[str, object] = {}
    order: list[str] = []
    lines_of: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"malformed line {raw.strip()!r} (expected key = value)", lineno, path)
        key, _, value = (part.strip() for part in line.partition("="))
        if not key or not value:
            raise ConfigError(f"malformed line {raw.strip()!r} (expected key = value)", lineno, path)
        if key in lines_of:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines_of[key]})", lineno, path)
        lines_of[key] = lineno
        if key in PARAM_KEYS:
            try:
                x = float(value)
            except ValueError:
                raise ConfigError(f"{key}: not a number: {value!r}", lineno, path) from None
            if not math.isfinite(x):
                raise ConfigError(f"{key}: value out of range (must be finite)", lineno, path)
            if key in POSITIVE_MODEL_KEYS and not x > 0:
                raise ConfigError(f"{key}: value {x!r} out of range (must be > 0)", lineno, path)
            if x < 0:
                raise ConfigError(f"{key}: value {x!r} out of range (must be >= 0)", lineno, path)
            model[PARAM_KEYS[key]] = x
        elif key in OPTION_TYPES:
            kind = OPTION_TYPES[key]
            try:
                x = kind(value)
            except ValueError:
                raise ConfigError(f"{key}: expected {kind.__name__}, got {value!r}", lineno, path) from None
            if kind is float and not math.isfinite(x):
                raise ConfigError(f"{key}: value out of range (must be finite)", lineno, path)
            msg = check_option(key, x)
            if msg:
                raise ConfigError(f"{key}: value {x!r} out of range ({msg})", lineno, path)
            opts[key] = x
            order.append(key)
        else:
            raise ConfigError(f"unknown key {key!r}", lineno, path)
    missing = [k for k, attr in PARAM_KEYS.items() if attr not in model and k != "d"]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}", None, path)
    try:
        params = ModelParams(**model)
    except ValueError as exc:
        raise ConfigError(str(exc), None, path) from None
    return RunConfig(params, RunOptions(**opts), tuple(order))


def parse_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except FileNotFoundError:
        raise ConfigError("config file not found", None, path) from None
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc.strerror}", None, path) from None
    return parse_text(text, path)


def canonical_config() -> RunConfig:
    return RunConfig(ModelParams.canonical())
