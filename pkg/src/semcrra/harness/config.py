"""Scenario files: sectioned ``key = value`` text with physical units.

Grammar (every key is optional; missing keys take the defaults below)::

    [scenario]
    users = 10                  # U >= 1
    side = 50 m                 # square edge; the server sits at the centre
    seed = 1
    d0 = 24.5 kbit              # payload before compression; one value or one per user
    t0 = 5 ms                   # deadline; one value or one per user
    n0 = -174 dBm/Hz
    features = 64               # compression grid is k / features

    [budgets]
    b_min = 0.01 MHz
    b_max = 10 MHz              # fixed value used by the power sweep
    p_min = -20 dBm
    p_max = 0.1 W               # fixed value used by the bandwidth sweep

    [channel]
    delta = distance            # a number, a comma list (one per user) or "distance"
    c = 1e-9                    # distance rule: delta_i = c * d_i ** (-kappa / 2)
    kappa = 3
    min_distance = 1 m

    [accuracy]
    beta = 0.9, 0, -0.02, 3.8   # b1 exp(b2 o) + b3 exp(b4 o)
    samples = acc.txt           # fit to (o, accuracy) pairs instead of using beta

    [sweep]
    bandwidth = 1 MHz, 30 MHz, 10   # start, stop, count; log-spaced
    power = 1 mW, 1 W, 10
    methods = CRRA, FCR, FRA, MSR
    fixed_o = 0.5                   # ratio used by FCR

Units: bit, kbit, Mbit, Gbit, B, kB, MB, GB (bytes are 8 bits, prefixes
decimal); s, ms, us; Hz, kHz, MHz, GHz; W, mW, uW, dBm, dBW; W/Hz,
mW/Hz, dBm/Hz, dBW/Hz; m, km. A bare number is taken in SI base units.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..resource_opt import Budgets

# 24.5 MB read as decimal megabytes
MEGABYTE_D0_BITS = 24.5e6 * 8

_LINEAR = {
    "bits": {"bit": 1.0, "kbit": 1e3, "mbit": 1e6, "gbit": 1e9,
             "b": 8.0, "kb": 8e3, "mb": 8e6, "gb": 8e9},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6},
    "freq": {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9},
    "power": {"w": 1.0, "mw": 1e-3, "uw": 1e-6},
    "psd": {"w/hz": 1.0, "mw/hz": 1e-3},
    "length": {"m": 1.0, "km": 1e3},
    "none": {},
}
# decibel units: value in dB relative to this many watts (per Hz for psd)
_DECIBEL = {
    "power": {"dbm": 1e-3, "dbw": 1.0},
    "psd": {"dbm/hz": 1e-3, "dbw/hz": 1.0},
}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z/]*)\s*$")

_KEYS = {
    "scenario": {"users", "side", "seed", "d0", "t0", "n0", "features"},
    "budgets": {"b_min", "b_max", "p_min", "p_max"},
    "channel": {"delta", "c", "kappa", "min_distance"},
    "accuracy": {"beta", "samples"},
    "sweep": {"bandwidth", "power", "methods", "fixed_o"},
}
_METHODS = ("CRRA", "FCR", "FRA", "MSR")


def parse_quantity(text: str, kind: str) -> float:
    """Convert ``"24.5 kbit"``-style text to SI base units of ``kind``."""
    m = _QUANTITY.match(text)
    if not m:
        raise ValueError(f"cannot read a number from {text!r}")
    value, unit = float(m.group(1)), m.group(2).lower()
    if not unit:
        return value
    if unit in _LINEAR[kind]:
        return value * _LINEAR[kind][unit]
    if unit in _DECIBEL.get(kind, {}):
        return _DECIBEL[kind][unit] * 10.0 ** (value / 10.0)
    allowed = sorted(_LINEAR[kind]) + sorted(_DECIBEL.get(kind, {}))
    raise ValueError(f"unit {m.group(2)!r} is not a {kind} unit (use one of {', '.join(allowed)})")


@dataclass(frozen=True)
class DeltaSpec:
    """How per-user channel spreads are obtained."""

    kind: str = "distance"          # "constant" | "list" | "distance"
    values: tuple = ()
    c: float = 1e-9
    kappa: float = 3.0
    min_distance: float = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    users: int = 10
    side: float = 50.0
    seed: int = 1
    d0: tuple = (24.5e3,)
    t0: tuple = (5e-3,)
    n0: float = 1e-3 * 10 ** (-174 / 10)
    features: int = 64
    budgets: Budgets = field(default_factory=lambda: Budgets(1e4, 1e7, 1e-5, 0.1))
    delta: DeltaSpec = field(default_factory=DeltaSpec)
    beta: tuple | None = (0.9, 0.0, -0.02, 3.8)
    samples: Path | None = None
    bandwidth_sweep: tuple = (1e6, 3e7, 10)
    power_sweep: tuple = (1e-3, 1.0, 10)
    methods: tuple = _METHODS
    fixed_o: float = 0.5

    def __post_init__(self):
        check = _Checker("<config>")
        check.validate(self)

    def per_user(self, values: tuple, name: str) -> np.ndarray:
        if len(values) == 1:
            return np.full(self.users, float(values[0]))
        if len(values) != self.users:
            raise ConfigError(f"{name}: expected 1 or {self.users} values, got {len(values)}")
        return np.asarray(values, dtype=float)

    def sweep_values(self, param: str) -> np.ndarray:
        start, stop, count = self.bandwidth_sweep if param == "bandwidth" else self.power_sweep
        return np.geomspace(start, stop, int(count))

    def with_megabyte_d0(self) -> "ScenarioConfig":
        return replace(self, d0=(MEGABYTE_D0_BITS,))


class _Checker:
    """Invariant checks; messages name the field and, when known, the line."""

    def __init__(self, source: str, lines: dict | None = None):
        self.source = source
        self.lines = lines or {}

    def fail(self, section: str, key: str, message: str):
        where = self.lines.get((section, key))
        loc = f"{self.source}:{where}" if where else self.source
        raise ConfigError(f"{loc}: [{section}] {key}: {message}")

    def validate(self, cfg: ScenarioConfig) -> None:
        if int(cfg.users) != cfg.users or cfg.users < 1:
            self.fail("scenario", "users", f"must be an integer >= 1, got {cfg.users}")
        for key in ("side", "n0"):
            v = getattr(cfg, key)
            if not (math.isfinite(v) and v > 0):
                self.fail("scenario", key, f"must be positive, got {v}")
        for key in ("d0", "t0"):
            vals = getattr(cfg, key)
            if len(vals) not in (1, cfg.users):
                self.fail("scenario", key, f"expected 1 or {cfg.users} values, got {len(vals)}")
            if not all(math.isfinite(v) and v > 0 for v in vals):
                self.fail("scenario", key, "values must be positive")
        if int(cfg.features) != cfg.features or cfg.features < 2:
            self.fail("scenario", "features", f"must be an integer >= 2, got {cfg.features}")
        d = cfg.delta
        if d.kind not in ("constant", "list", "distance"):
            self.fail("channel", "delta", f"unknown kind {d.kind!r}")
        if d.kind in ("constant", "list"):
            if d.kind == "constant" and len(d.values) != 1:
                self.fail("channel", "delta", "a constant spread takes one value")
            if d.kind == "list" and len(d.values) != cfg.users:
                self.fail("channel", "delta", f"expected {cfg.users} values, got {len(d.values)}")
            if not all(math.isfinite(v) and v > 0 for v in d.values):
                self.fail("channel", "delta", "values must be positive")
        else:
            if not (d.c > 0 and math.isfinite(d.c)):
                self.fail("channel", "c", f"must be positive, got {d.c}")
            if not math.isfinite(d.kappa) or d.kappa < 0:
                self.fail("channel", "kappa", f"must be >= 0, got {d.kappa}")
            if not d.min_distance > 0:
                self.fail("channel", "min_distance", f"must be positive, got {d.min_distance}")
        if cfg.beta is None and cfg.samples is None:
            self.fail("accuracy", "beta", "give beta or samples")
        if cfg.beta is not None and len(cfg.beta) != 4:
            self.fail("accuracy", "beta", f"expected 4 values, got {len(cfg.beta)}")
        for key, (lo, hi, count) in (("bandwidth", cfg.bandwidth_sweep), ("power", cfg.power_sweep)):
            if not (0 < lo < hi) or int(count) != count or count < 2:
                self.fail("sweep", key, "needs 0 < start < stop and an integer count >= 2")
        unknown = [m for m in cfg.methods if m not in _METHODS]
        if unknown or not cfg.methods:
            self.fail("sweep", "methods", f"choose from {', '.join(_METHODS)}")
        if not 0 < cfg.fixed_o < 1:
            self.fail("sweep", "fixed_o", f"must lie in (0, 1), got {cfg.fixed_o}")


def _line_numbers(text: str) -> dict:
    out, section = {}, None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
        elif section and ("=" in line or ":" in line) and not line.startswith(("#", ";")):
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
            out.setdefault((section, key), n)
    return out


def _numbers(text: str, kind: str) -> tuple:
    return tuple(parse_quantity(part, kind) for part in text.split(",") if part.strip())


def parse_scenario(text: str, source: str = "<string>", base_dir: Path | None = None
                   ) -> ScenarioConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"),
                                       comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        loc = f"{source}:{line}" if line else source
        reason = {configparser.MissingSectionHeaderError: "text before the first [section]",
                  configparser.ParsingError: "expected 'key = value'"}.get(type(exc))
        message = re.sub(r"^While reading from .*?\]: ", "", reason or exc.message)
        raise ConfigError(f"{loc}: {message}") from None
    lines = _line_numbers(text)
    check = _Checker(source, lines)
    for section in parser.sections():
        if section not in _KEYS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key in parser[section]:
            if key not in _KEYS[section]:
                check.fail(section, key, "unknown key")

    def get(section, key, convert, default):
        if not parser.has_option(section, key):
            return default
        raw = parser.get(section, key)
        try:
            return convert(raw)
        except (ValueError, TypeError) as exc:
            check.fail(section, key, str(exc))

    base = ScenarioConfig()
    users = get("scenario", "users", int, base.users)
    delta = base.delta
    kind = get("channel", "delta", str.strip, None)
    if kind is not None:
        if kind.lower() == "distance":
            delta = replace(delta, kind="distance")
        else:
            vals = get("channel", "delta", lambda s: _numbers(s, "none"), ())
            delta = DeltaSpec(kind="constant" if len(vals) == 1 else "list", values=vals)
    if delta.kind == "distance":
        delta = replace(
            delta,
            c=get("channel", "c", lambda s: parse_quantity(s, "none"), delta.c),
            kappa=get("channel", "kappa", lambda s: parse_quantity(s, "none"), delta.kappa),
            min_distance=get("channel", "min_distance", lambda s: parse_quantity(s, "length"),
                             delta.min_distance))

    samples = get("accuracy", "samples", str.strip, None)
    beta = get("accuracy", "beta", lambda s: _numbers(s, "none"), None)
    if samples is not None:
        samples = Path(samples)
        if not samples.is_absolute() and base_dir is not None:
            samples = base_dir / samples
    elif beta is None:
        beta = base.beta

    def sweep(kind):
        def convert(s):
            parts = [p.strip() for p in s.split(",")]
            if len(parts) != 3:
                raise ValueError("expected start, stop, count")
            return (parse_quantity(parts[0], kind), parse_quantity(parts[1], kind),
                    float(parts[2]))
        return convert

    try:
        b = base.budgets
        budgets = Budgets(
            get("budgets", "b_min", lambda s: parse_quantity(s, "freq"), b.b_min),
            get("budgets", "b_max", lambda s: parse_quantity(s, "freq"), b.b_max),
            get("budgets", "p_min", lambda s: parse_quantity(s, "power"), b.p_min),
            get("budgets", "p_max", lambda s: parse_quantity(s, "power"), b.p_max))
    except ValueError as exc:
        raise ConfigError(f"{source}: [budgets] {exc}") from None
    cfg = dict(
        users=users,
        side=get("scenario", "side", lambda s: parse_quantity(s, "length"), base.side),
        seed=get("scenario", "seed", int, base.seed),
        d0=get("scenario", "d0", lambda s: _numbers(s, "bits"), base.d0),
        t0=get("scenario", "t0", lambda s: _numbers(s, "time"), base.t0),
        n0=get("scenario", "n0", lambda s: parse_quantity(s, "psd"), base.n0),
        features=get("scenario", "features", int, base.features),
        budgets=budgets,
        delta=delta,
        beta=beta,
        samples=samples,
        bandwidth_sweep=get("sweep", "bandwidth", sweep("freq"), base.bandwidth_sweep),
        power_sweep=get("sweep", "power", sweep("power"), base.power_sweep),
        methods=get("sweep", "methods",
                    lambda s: tuple(m.strip().upper() for m in s.split(",") if m.strip()),
                    base.methods),
        fixed_o=get("sweep", "fixed_o", float, base.fixed_o),
    )
    # run the checks with line information before building the frozen object
    probe = object.__new__(ScenarioConfig)
    for k, v in cfg.items():
        object.__setattr__(probe, k, v)
    check.validate(probe)
    return ScenarioConfig(**cfg)


def load_scenario(path) -> ScenarioConfig:
    """Read and validate a scenario file; an empty file gives the defaults."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc.strerror}") from None
    return parse_scenario(text, source=str(path), base_dir=path.parent)
