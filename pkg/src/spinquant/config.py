"""Run configuration: flat ``key = value`` text files.

Blank lines and ``#`` comments are ignored; list values are comma separated.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

__all__ = ["RunConfig", "ConfigError", "validate_config", "load_config", "config_help", "parse_tau_list"]


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


def _default_times():
    return [0.0, 0.2, 0.6, 1.0, 2.0]


@dataclass
class RunConfig:
    tau_c_over_period: float = 20.0
    n_paths: int = 100_000
    tau_end: float = 2.0
    snapshot_times: list[float] = field(default_factory=_default_times)
    n_theta_bins: int = 50
    n_theta_grid: int = 2048
    n_tau_grid: int = 4096
    master_seed: int = 1234
    output_dir: str = "spinquant_out"

    @property
    def tau_c(self) -> float:
        """Scattering time in units of 1/omega."""
        return 2.0 * math.pi * self.tau_c_over_period

    def check(self) -> "RunConfig":
        if not (self.tau_c_over_period > 0 and math.isfinite(self.tau_c_over_period)):
            raise ConfigError("tau_c_over_period must be a positive number", "tau_c_over_period")
        for key in ("n_paths", "n_theta_bins"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be a positive integer", key)
        for key in ("n_theta_grid", "n_tau_grid"):
            if getattr(self, key) < 2:
                raise ConfigError(f"{key} must be an integer >= 2", key)
        if not (self.tau_end > 0 and math.isfinite(self.tau_end)):
            raise ConfigError("tau_end must be a positive number", "tau_end")
        if not self.snapshot_times:
            raise ConfigError("snapshot_times must not be empty", "snapshot_times")
        for t in self.snapshot_times:
            if not (0.0 <= t <= self.tau_end):
                raise ConfigError(f"snapshot time {t!r} outside [0, tau_end={self.tau_end!r}]", "snapshot_times")
        if not (0 <= self.master_seed < 2 ** 64):
            raise ConfigError("master_seed must be an integer in [0, 2**64)", "master_seed")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        lines = []
        for k, v in asdict(self).items():
            if isinstance(v, list):
                v = ", ".join(repr(float(x)) for x in v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"


_HELP = {
    "tau_c_over_period": "ratio t_c / (2 pi / omega) of scattering time to precession period",
    "n_paths": "ensemble size",
    "tau_end": "simulation horizon in units of t_c",
    "snapshot_times": "comma-separated snapshot times in units of t_c",
    "n_theta_bins": "histogram bins on [0, pi]",
    "n_theta_grid": "theta' quadrature/sampling grid points",
    "n_tau_grid": "coherence-clock grid points of the rate table",
    "master_seed": "64-bit seed; path i uses stream (master_seed, i)",
    "output_dir": "directory for CSV outputs and manifest.json",
}


def config_help() -> str:
    d = RunConfig()
    out = ["config keys (key = value):"]
    for f in fields(RunConfig):
        v = getattr(d, f.name)
        if isinstance(v, list):
            v = ", ".join(f"{x:g}" for x in v)
        out.append(f"  {f.name:<18} {_HELP[f.name]} (default: {v})")
    return "\n".join(out)


def _parse_int(key, raw, line):
    try:
        return int(raw, 0)
    except ValueError:
        raise ConfigError(f"{key} expects an integer, got {raw!r}", key, line) from None


def _parse_float(key, raw, line):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key} expects a number, got {raw!r}", key, line) from None


def validate_config(text: str) -> RunConfig:
    """Parse flat config text into a checked :class:`RunConfig`.

    Unknown keys, duplicates and malformed values raise :class:`ConfigError`
    carrying the key name and line number.
    """
    types = {f.name: f.type for f in fields(RunConfig)}
    values: dict = {}
    lines: dict = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw_line.strip()!r}", None, lineno)
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"unknown key {key!r}", key, lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", key, lineno)
        if raw == "":
            raise ConfigError(f"{key} has no value", key, lineno)
        t = types[key]
        if t == "int":
            v = _parse_int(key, raw, lineno)
        elif t == "float":
            v = _parse_float(key, raw, lineno)
        elif t == "list[float]":
            v = [_parse_float(key, x.strip(), lineno) for x in raw.split(",") if x.strip()]
        else:
            v = raw.strip("\"'")
        values[key] = v
        lines[key] = lineno
    cfg = RunConfig(**values)
    try:
        return cfg.check()
    except ConfigError as e:
        raise ConfigError(str(e), e.key, lines.get(e.key)) from None


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return validate_config(fh.read())


def parse_tau_list(text: str) -> list[float]:
    """Parse e.g. ``"pi, 2pi, 3*pi, 12.5"`` (``π`` accepted) into floats."""
    out = []
    for tok in text.split(","):
        tok = tok.strip().replace("π", "pi").replace("*", "").replace(" ", "")
        if not tok:
            continue
        try:
            if tok.endswith("pi"):
                coef = tok[:-2]
                out.append((float(coef) if coef else 1.0) * math.pi)
            else:
                out.append(float(tok))
        except ValueError:
            raise ConfigError(f"cannot parse time {tok!r}", "tau_list") from None
    if not out:
        raise ConfigError("empty time list", "tau_list")
    if any(not t > 0 for t in out):
        raise ConfigError("times must be > 0", "tau_list")
    return out
