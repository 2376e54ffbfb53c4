"""Flat `key = value` experiment configuration; list values are comma-separated."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from indexfund.backtest import METHODS, PERIODS
from indexfund.benchmarks import KINDS
from indexfund.errors import ConfigError


@dataclass
class ExperimentConfig:
    prices_path: str = ""
    shares_path: str = ""
    train_fraction: float = 0.65
    k_values: list = field(default_factory=lambda: [5, 10, 20])
    frequencies: list = field(default_factory=lambda: list(PERIODS))
    benchmarks: list = field(default_factory=lambda: list(KINDS))
    methods: list = field(default_factory=lambda: list(METHODS))
    turnover_bound: float = 1.0
    seed: int = 7
    synthetic: bool = False
    synthetic_n: int = 81
    synthetic_days: int = 2520
    recluster: bool = False
    jobs: int = 1
    output_dir: str = "output"

    def validate(self):
        for name in ("k_values", "frequencies", "benchmarks", "methods"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must not be empty")
        if any(k < 1 for k in self.k_values):
            raise ConfigError(f"k_values must be positive, got {self.k_values}")
        for name, allowed in (("frequencies", tuple(PERIODS)), ("benchmarks", KINDS),
                              ("methods", METHODS)):
            bad = [v for v in getattr(self, name) if v not in allowed]
            if bad:
                raise ConfigError(f"{name}: unknown value(s) {bad}; expected {allowed}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if self.turnover_bound <= 0:
            raise ConfigError(f"turnover_bound must be positive, got {self.turnover_bound}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        if not self.synthetic and not (self.prices_path and self.shares_path):
            raise ConfigError("prices_path and shares_path are required unless synthetic = true")
        return self


# keys left out of the serialized config: they do not affect results
_RUNTIME_KEYS = ("output_dir", "jobs")


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def coerce(name, text):
    """Convert the text form of `name` to its typed value."""
    f = {f.name: f for f in fields(ExperimentConfig)}.get(name)
    if f is None:
        raise ConfigError(f"unknown config key {name!r}")
    default = getattr(ExperimentConfig(), name)
    try:
        if isinstance(default, bool):
            return _parse_bool(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, list):
            items = [s.strip() for s in text.split(",") if s.strip()]
            return [int(s) for s in items] if name == "k_values" else items
        return text.strip()
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {exc}") from exc


def read_config(path):
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = coerce(key, value)
    return values


def format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    return str(value)


def dump_config(cfg):
    lines = [f"{f.name} = {format_value(getattr(cfg, f.name))}"
             for f in fields(cfg) if f.name not in _RUNTIME_KEYS]
    return "\n".join(lines) + "\n"
