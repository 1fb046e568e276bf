"""Scenario configuration: defaults, the flat key-value file format, unit
validation, and the SI-resolved manifest echo.

Values in config files carry explicit units ("tx_power: 30 dBm",
"bandwidth: 20 MHz"); everything is converted to SI once at load and all
internal math runs in W, m, s, Hz. The manifest echoes the resolved
configuration in canonical units so a run can be reproduced by loading the
echo.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields, replace

__all__ = ["ScenarioConfig", "ConfigError", "load_config", "parse_mapping", "DEFAULTS"]

STRESSOR_MODES = ("both", "interference", "distance")
ALLOCATOR_MODES = ("off", "power", "antennas")


class ConfigError(ValueError):
    """Raised with per-field diagnostics when a scenario file is invalid."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class ScenarioConfig:
    # link and stressor physics (SI)
    drift: float = 0.2                    # mean spacing drift [m/slot]
    variance0: float = 0.25               # initial fluctuation variance [m^2]
    tx_power_w: float = 1.0               # desired-link transmit power [W] (30 dBm)
    interferer_power_w: float = 10 ** 0.5 / 1e3   # per interferer [W] (5 dBm)
    dist_min: float = 20.0                # interferer distance draw [m]
    dist_max: float = 100.0
    wavelength: float = 0.05              # [m]
    packet_bits: float = 2400.0
    bandwidth_hz: float = 20e6
    path_loss_exp: float = 3.5
    arrival_rate0: float = 0.2            # interferer arrivals [1/slot]
    noise_density_dbm_hz: float = -150.0
    initial_interferers: int = 5
    initial_distance: float = 10.0        # [m]
    variance_growth: float = 0.4          # [1/slot]
    sojourn_rate: float = 0.5             # geometric hold rate
    variance_volatility: float = 0.35     # [1/sqrt(slot)], oracle only
    growth_linear: float = 0.8
    growth_exponent: float = 0.7

    # event model
    p_interference: float = 0.5
    p_distance: float = 0.5
    single_event_prob: float = 0.85       # event probability of the lone active stressor

    # intolerance model calibration
    tol_interference_s: float = 4.4e-4    # interference-branch jitter tolerance [s]
    tol_distance_s: float = 110.0         # distance-branch jitter tolerance [s]
    diversity_hardening: float = 1.05      # antenna exponent damping range-induced jitter
    interferer_antenna_exponent: float = 0.45  # interferer power scaling with antennas

    # run control
    delta: float = 0.5                    # transition half-period [slot]
    horizon: int = 100
    trials: int = 10000
    seed: int = 1234
    parallelism: int = 1
    stressors: str = "both"
    allocator: str = "off"
    antennas: int = 1

    # allocator settings
    antenna_max: int = 30
    risk_alpha: float = 0.05
    levels: int = 10
    steps_per_level: int = 1
    power_step_max_w: float = 0.3         # per-level cap [W]
    power_budget_w: float = 3.0           # episode budget [W]
    restore_target: float = 0.999
    normal_threshold: float = 0.999
    kkt_tol: float = 1e-6

    @property
    def noise_power_w(self) -> float:
        """Total noise power over the bandwidth [W]."""
        return 10 ** (self.noise_density_dbm_hz / 10.0) / 1e3 * self.bandwidth_hz

    def event_probs(self) -> tuple[float, float]:
        """(p_interference, p_distance) after applying the stressor toggle:
        a disabled stressor has event probability zero, a lone active one
        uses the single-stressor preset."""
        if self.stressors == "both":
            return self.p_interference, self.p_distance
        if self.stressors == "interference":
            return self.single_event_prob, 0.0
        if self.stressors == "distance":
            return 0.0, self.single_event_prob
        raise ValueError(f"unknown stressor mode {self.stressors!r}")

    @property
    def mean_beta(self) -> float:
        """E[P_j * d^-alpha] for a uniform interferer distance [W]."""
        a = self.path_loss_exp
        lo, hi = self.dist_min, self.dist_max
        return self.interferer_power_w * (lo ** (1 - a) - hi ** (1 - a)) / ((a - 1) * (hi - lo))

    @property
    def mean_beta_sq(self) -> float:
        """E[(P_j * d^-alpha)^2] [W^2]."""
        a = 2.0 * self.path_loss_exp
        lo, hi = self.dist_min, self.dist_max
        return self.interferer_power_w ** 2 * (lo ** (1 - a) - hi ** (1 - a)) / ((a - 1) * (hi - lo))


DEFAULTS = ScenarioConfig()


# ---------------------------------------------------------------------------
# unit parsing

def _dbm_to_w(x: float) -> float:
    return 10 ** (x / 10.0) / 1e3

_POWER_UNITS = {"w": 1.0, "mw": 1e-3, "uw": 1e-6}
_FREQ_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
_LENGTH_UNITS = {"m": 1.0, "km": 1e3, "cm": 1e-2, "mm": 1e-3}
_TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}


def _scaled(units: dict[str, float], kind: str):
    def parse(num: float, unit: str) -> float:
        key = unit.lower()
        if key in units:
            return num * units[key]
        raise ValueError(f"expected a {kind} unit ({'/'.join(sorted(units))})")
    return parse


def _power(num: float, unit: str) -> float:
    if unit.lower() == "dbm":
        return _dbm_to_w(num)
    return _scaled(_POWER_UNITS, "power")(num, unit)


def _noise_density(num: float, unit: str) -> float:
    if unit.lower() != "dbm/hz":
        raise ValueError("expected dBm/Hz")
    return num


def _rate(num: float, unit: str) -> float:
    # per-slot rates; accept the per-second spelling as a synonym since the
    # slot is the time unit of the model
    if unit.lower() in ("/s", "1/s", "/slot", "1/slot"):
        return num
    raise ValueError("expected /s or /slot")


def _speed(num: float, unit: str) -> float:
    if unit.lower() in ("m/s", "m/slot"):
        return num
    raise ValueError("expected m/s or m/slot")


def _bare(num: float, unit: str) -> float:
    if unit:
        raise ValueError("no unit expected")
    return num


@dataclass(frozen=True)
class _Field:
    attr: str
    parse: object           # (number, unit) -> SI value, or None for enums
    unit_hint: str
    validate: object = None # SI value -> error string or None
    integer: bool = False
    choices: tuple = ()


def _positive(v) -> str | None:
    return None if v > 0 else "must be positive"


def _nonneg(v) -> str | None:
    return None if v >= 0 else "must be non-negative"


def _prob(v) -> str | None:
    return None if 0.0 <= v <= 1.0 else "must lie in [0, 1]"


def _open_prob(v) -> str | None:
    return None if 0.0 < v < 1.0 else "must lie in (0, 1)"


_SCHEMA: dict[str, _Field] = {
    "drift": _Field("drift", _speed, "m/s", _nonneg),
    "variance0": _Field("variance0", _bare, "m^2 (bare)", _positive),
    "tx_power": _Field("tx_power_w", _power, "dBm or W", _positive),
    "interferer_power": _Field("interferer_power_w", _power, "dBm or W", _positive),
    "interferer_dist_min": _Field("dist_min", _scaled(_LENGTH_UNITS, "length"), "m", _positive),
    "interferer_dist_max": _Field("dist_max", _scaled(_LENGTH_UNITS, "length"), "m", _positive),
    "wavelength": _Field("wavelength", _scaled(_LENGTH_UNITS, "length"), "m", _positive),
    "packet_bits": _Field("packet_bits", _bare, "bit (bare)", _positive),
    "bandwidth": _Field("bandwidth_hz", _scaled(_FREQ_UNITS, "frequency"), "Hz/MHz", _positive),
    "path_loss_exponent": _Field("path_loss_exp", _bare, "bare", _positive),
    "arrival_rate": _Field("arrival_rate0", _rate, "/s", _nonneg),
    "noise_density": _Field("noise_density_dbm_hz", _noise_density, "dBm/Hz"),
    "initial_interferers": _Field("initial_interferers", _bare, "count", _nonneg, integer=True),
    "initial_distance": _Field("initial_distance", _scaled(_LENGTH_UNITS, "length"), "m", _positive),
    "variance_growth": _Field("variance_growth", _bare, "1/slot (bare)", _positive),
    "sojourn_rate": _Field("sojourn_rate", _bare, "bare", _open_prob),
    "variance_volatility": _Field("variance_volatility", _bare, "bare", _nonneg),
    "growth_linear": _Field("growth_linear", _bare, "bare", _nonneg),
    "growth_exponent": _Field("growth_exponent", _bare, "bare", _nonneg),
    "p_interference": _Field("p_interference", _bare, "bare", _prob),
    "p_distance": _Field("p_distance", _bare, "bare", _prob),
    "single_event_prob": _Field("single_event_prob", _bare, "bare", _prob),
    "tol_interference": _Field("tol_interference_s", _scaled(_TIME_UNITS, "time"), "s/ms/us", _positive),
    "tol_distance": _Field("tol_distance_s", _scaled(_TIME_UNITS, "time"), "s/ms/us", _positive),
    "diversity_hardening": _Field("diversity_hardening", _bare, "bare", _nonneg),
    "interferer_antenna_exponent": _Field("interferer_antenna_exponent", _bare, "bare", _nonneg),
    "delta": _Field("delta", _bare, "slot (bare)", _positive),
    "horizon": _Field("horizon", _bare, "slots", _positive, integer=True),
    "trials": _Field("trials", _bare, "count", _positive, integer=True),
    "seed": _Field("seed", _bare, "int", None, integer=True),
    "parallelism": _Field("parallelism", _bare, "count", _positive, integer=True),
    "stressors": _Field("stressors", None, "both|interference|distance", choices=STRESSOR_MODES),
    "allocator": _Field("allocator", None, "off|power|antennas", choices=ALLOCATOR_MODES),
    "antennas": _Field("antennas", _bare, "count", _positive, integer=True),
    "antenna_max": _Field("antenna_max", _bare, "count", _positive, integer=True),
    "risk_alpha": _Field("risk_alpha", _bare, "bare", _open_prob),
    "levels": _Field("levels", _bare, "count", _positive, integer=True),
    "steps_per_level": _Field("steps_per_level", _bare, "count", _positive, integer=True),
    "power_step_max": _Field("power_step_max_w", _power, "W", _positive),
    "power_budget": _Field("power_budget_w", _power, "W", _positive),
    "restore_target": _Field("restore_target", _bare, "bare", _prob),
    "normal_threshold": _Field("normal_threshold", _bare, "bare", _prob),
    "kkt_tol": _Field("kkt_tol", _bare, "bare", _positive),
}

_ATTR_TO_KEY = {f.attr: key for key, f in _SCHEMA.items()}


def _parse_value(key: str, raw: str):
    spec = _SCHEMA[key]
    raw = raw.strip()
    if spec.choices:
        if raw not in spec.choices:
            raise ValueError(f"expected one of {spec.choices}")
        return raw
    parts = raw.split(None, 1)
    try:
        num = float(parts[0])
    except (ValueError, IndexError):
        raise ValueError(f"expected a number with unit hint {spec.unit_hint}")
    unit = parts[1].strip() if len(parts) > 1 else ""
    value = spec.parse(num, unit)
    if spec.integer:
        if value != int(value):
            raise ValueError("expected an integer")
        value = int(value)
    if spec.validate is not None:
        problem = spec.validate(value)
        if problem:
            raise ValueError(problem)
    return value


def parse_mapping(mapping: dict) -> ScenarioConfig:
    """Build a config from a key -> raw-value mapping, rejecting unknown keys
    and collecting all diagnostics before failing."""
    problems = []
    resolved = {}
    for key, raw in mapping.items():
        if key not in _SCHEMA:
            problems.append(f"unknown key {key!r}")
            continue
        try:
            resolved[_SCHEMA[key].attr] = _parse_value(key, str(raw))
        except ValueError as exc:
            problems.append(f"{key}: {exc} (expected {_SCHEMA[key].unit_hint})")
    if problems:
        raise ConfigError(problems)
    cfg = replace(DEFAULTS, **resolved)
    _cross_validate(cfg)
    return cfg


def _cross_validate(cfg: ScenarioConfig) -> None:
    problems = []
    if cfg.dist_min >= cfg.dist_max:
        problems.append("interferer_dist_min: must be below interferer_dist_max")
    if cfg.power_step_max_w > cfg.power_budget_w:
        problems.append("power_step_max: must not exceed power_budget")
    if cfg.antennas > cfg.antenna_max:
        problems.append("antennas: must not exceed antenna_max")
    if problems:
        raise ConfigError(problems)


def load_config(path) -> ScenarioConfig:
    """Load a scenario from a flat key-value text file or a JSON echo.

    An empty file yields the built-in defaults. Text lines are
    ``key: value [unit]``; ``#`` starts a comment.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.strip()
    if not stripped:
        return DEFAULTS
    if stripped.startswith("{"):
        try:
            mapping = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"invalid JSON config: {exc}"])
        if not isinstance(mapping, dict):
            raise ConfigError(["JSON config must be an object"])
        return parse_mapping(mapping)
    mapping = {}
    problems = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if ":" not in body:
            problems.append(f"line {lineno}: expected 'key: value'")
            continue
        key, _, raw = body.partition(":")
        key = key.strip()
        if key in mapping:
            problems.append(f"line {lineno}: duplicate key {key!r}")
            continue
        mapping[key] = raw.strip()
    if problems:
        raise ConfigError(problems)
    return parse_mapping(mapping)


def to_mapping(cfg: ScenarioConfig) -> dict[str, str]:
    """Render the resolved configuration in canonical SI units; feeding the
    result back through :func:`parse_mapping` reproduces the config."""
    canonical_units = {
        "drift": "m/slot", "tx_power": "W", "interferer_power": "W",
        "interferer_dist_min": "m", "interferer_dist_max": "m",
        "wavelength": "m", "bandwidth": "Hz", "arrival_rate": "/slot",
        "noise_density": "dBm/Hz", "initial_distance": "m",
        "tol_interference": "s", "tol_distance": "s",
        "power_step_max": "W", "power_budget": "W",
    }
    out = {}
    for f in fields(cfg):
        key = _ATTR_TO_KEY[f.name]
        value = getattr(cfg, f.name)
        if key in ("stressors", "allocator"):
            out[key] = value
        elif key in canonical_units:
            out[key] = f"{value!r} {canonical_units[key]}"
        else:
            out[key] = repr(value)
    return out
