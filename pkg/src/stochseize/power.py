"""Block-level power budget, stimulation energy and battery-life projection.

All quantities are stored in base SI units (W, J, A, s, Hz, ohm). Scenario
files may give values as plain SI numbers or as unit strings such as
``"493.8 nW"``; a unit of the wrong dimension is rejected.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError, ParseError

SECONDS_PER_DAY = 86400.0
SECONDS_PER_YEAR = 365.25 * SECONDS_PER_DAY

# Measured (65 nm) feature-extraction power per (feature, channel).
TABLE_FE_POWER_W = {
    "MEAN": 1.995e-6,
    "MEAN_ABS": 3.539e-6,
    "MEAN_ENERGY": 1.680e-6,
    "ENERGY_MEAN": 2.879e-6,
}
PUBLISHED_TOTAL_W = 6.189e-6
LUT_UNIT_LEVELS = 8

# ---------------------------------------------------------------------------
# unit handling

_PREFIX = {"f": 1e-15, "p": 1e-12, "n": 1e-9, "u": 1e-6, "µ": 1e-6, "μ": 1e-6, "m": 1e-3, "": 1.0, "k": 1e3, "M": 1e6}
_BASE = {  # symbol -> (dimension, factor to SI)
    "W": ("power", 1.0),
    "J": ("energy", 1.0),
    "Wh": ("energy", 3600.0),
    "A": ("current", 1.0),
    "V": ("voltage", 1.0),
    "s": ("time", 1.0),
    "Hz": ("frequency", 1.0),
    "ohm": ("resistance", 1.0),
    "Ω": ("resistance", 1.0),
}
_QTY = re.compile(r"^\s*([-+0-9.eE]+)\s*([a-zA-Zµμ Ω]*?)\s*(?:/\s*bit)?\s*$")


class UnitError(ConfigError):
    pass


def parse_quantity(value, dimension: str) -> float:
    """Convert ``value`` to SI, checking that its unit has ``dimension``."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, dict):
        value = f"{value['value']} {value['unit']}"
    if not isinstance(value, str):
        raise UnitError(f"cannot interpret {value!r} as a {dimension}")
    m = _QTY.match(value)
    if not m:
        raise UnitError(f"cannot parse quantity {value!r}")
    number, unit = float(m.group(1)), m.group(2).strip()
    if unit == "":
        return number
    for sym, (dim, factor) in sorted(_BASE.items(), key=lambda kv: -len(kv[0])):
        if unit.endswith(sym) and unit[: -len(sym)] in _PREFIX:
            if dim != dimension:
                raise UnitError(f"{value!r} is a {dim}, expected a {dimension}")
            return number * factor * _PREFIX[unit[: -len(sym)]]
    raise UnitError(f"unknown unit {unit!r} in {value!r}")


def _unit(dimension: str, default):
    return field(default=default, metadata={"dimension": dimension})


# ---------------------------------------------------------------------------
# model types


@dataclass(frozen=True)
class SystemParams:
    supply_v: float = _unit("voltage", 1.2)
    sample_rate_hz: float = _unit("frequency", 1000.0)
    i_stim_avg: float = _unit("current", 1e-3)
    i_stim_max: float = _unit("current", 12e-3)
    r_lead_ohm: float = _unit("resistance", 1200.0)
    pulse_width_s: float = _unit("time", 160e-6)
    stim_period_s: float = _unit("time", 5e-3)
    stim_duration_avg_s: float = _unit("time", 0.1)
    stim_duration_max_s: float = _unit("time", 5.0)
    battery_wh: float = _unit("energy_wh", 3.3)

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ConfigError(f"{f.name} must be positive")
        if not 0 < self.duty_cycle <= 1:
            raise ConfigError("pulse width exceeds the stimulation period")

    @property
    def duty_cycle(self) -> float:
        return self.pulse_width_s / self.stim_period_s

    @property
    def battery_j(self) -> float:
        return self.battery_wh * 3600.0


@dataclass(frozen=True)
class BlockPower:
    """Per-(feature, channel) block power. ``fe_avg_w=None`` means the mean of ``fe_by_feature_w``."""

    sense_preamp_w: float = _unit("power", 1.2e-6)
    fe_by_feature_w: dict = field(default_factory=lambda: dict(TABLE_FE_POWER_W))
    fe_avg_w: float | None = _unit("power", None)
    lut_unit_w: float = _unit("power", 493.80e-9)
    trng_bit_j: float = _unit("energy", 20e-15)
    ce_bit_j: float = _unit("energy", 20e-15)

    def __post_init__(self):
        if any(v < 0 for v in self.fe_by_feature_w.values()):
            raise ConfigError("feature powers must be non-negative")
        mean = sum(self.fe_by_feature_w.values()) / len(self.fe_by_feature_w)
        if self.fe_avg_w is None:
            object.__setattr__(self, "fe_avg_w", mean)
        elif abs(self.fe_avg_w - mean) > 1e-9:
            raise ConfigError(f"fe_avg_w {self.fe_avg_w} disagrees with the feature mean {mean}")
        for name in ("sense_preamp_w", "lut_unit_w", "trng_bit_j", "ce_bit_j"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")

    @property
    def fe_max_w(self) -> float:
        return max(self.fe_by_feature_w.values())


@dataclass(frozen=True)
class StimulationProfile:
    current_a: float
    pulse_width_s: float
    duration_s: float
    events_per_day: float = 0.0
    pulse_rate_hz: float = 200.0

    def __post_init__(self):
        if min(self.current_a, self.pulse_width_s, self.duration_s, self.events_per_day, self.pulse_rate_hz) < 0:
            raise ConfigError("stimulation parameters must be non-negative")
        if self.duty_cycle > 1:
            raise ConfigError("pulse width x pulse rate exceeds 1")

    @property
    def duty_cycle(self) -> float:
        return self.pulse_width_s * self.pulse_rate_hz


# typical and high-activity responsive stimulation
AVERAGE_STIMULATION = StimulationProfile(6e-3, 160e-6, 0.1, events_per_day=570)
HIGH_STIMULATION = StimulationProfile(12e-3, 200e-6, 0.1, events_per_day=1330)


# ---------------------------------------------------------------------------
# operations


def lut_power(levels: int, unit: BlockPower = BlockPower()) -> float:
    """Level-detector LUT power, linear in level count from the 8-level unit."""
    if levels < 1:
        raise ValueError("LUT needs at least one level")
    return levels / LUT_UNIT_LEVELS * unit.lut_unit_w


def rate_power(energy_per_bit: float, rate_hz: float) -> float:
    if energy_per_bit < 0 or rate_hz < 0:
        raise ValueError("energy and rate must be non-negative")
    return energy_per_bit * rate_hz


def stimulation_energy(p: StimulationProfile, r_lead: float) -> float:
    """Energy of one stimulation burst, ``I^2 R T D``."""
    return p.current_a ** 2 * r_lead * p.duration_s * p.duty_cycle


def detection_breakdown(blocks: BlockPower = BlockPower(), lut_levels: int = 40, rate_hz: float = 1000.0,
                        fe_w: float | None = None) -> dict:
    """Watts per block for one (feature, channel); ``fe_w`` overrides the average FE power."""
    return {
        "sense_preamp": blocks.sense_preamp_w,
        "feature_extraction": blocks.fe_avg_w if fe_w is None else fe_w,
        "lut": lut_power(lut_levels, blocks),
        "trng": rate_power(blocks.trng_bit_j, rate_hz),
        "c_element": rate_power(blocks.ce_bit_j, rate_hz),
    }


def total_detection_power(blocks: BlockPower = BlockPower(), lut_levels: int = 40, rate_hz: float = 1000.0,
                          fe_w: float | None = None) -> float:
    return sum(detection_breakdown(blocks, lut_levels, rate_hz, fe_w).values())


def average_power(params: SystemParams, pairs: int, stim: StimulationProfile, blocks: BlockPower = BlockPower(),
                  lut_levels: int = 40) -> float:
    if pairs < 1:
        raise ValueError("need at least one (feature, channel) pair")
    detect = pairs * total_detection_power(blocks, lut_levels, params.sample_rate_hz)
    stim_w = stimulation_energy(stim, params.r_lead_ohm) * stim.events_per_day / SECONDS_PER_DAY
    return detect + stim_w


def battery_life(params: SystemParams, pairs: int, stim: StimulationProfile, blocks: BlockPower = BlockPower(),
                 lut_levels: int = 40) -> float:
    """Years until the battery is drained by detection plus day-averaged stimulation."""
    p = average_power(params, pairs, stim, blocks, lut_levels)
    if p <= 0:
        raise ValueError("total power is zero; battery life is unbounded")
    return params.battery_j / p / SECONDS_PER_YEAR


# ---------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class Scenario:
    name: str = "default"
    params: SystemParams = SystemParams()
    blocks: BlockPower = BlockPower()
    stim: StimulationProfile = AVERAGE_STIMULATION
    pairs: int = 4
    lut_levels: int = 40

    def report(self) -> dict:
        per_block = detection_breakdown(self.blocks, self.lut_levels, self.params.sample_rate_hz)
        per_pair = sum(per_block.values())
        stim_j = stimulation_energy(self.stim, self.params.r_lead_ohm)
        return {
            "scenario": self.name,
            "per_block_w": per_block,
            "per_pair_w": per_pair,
            "published_per_pair_w": PUBLISHED_TOTAL_W,
            "pairs": self.pairs,
            "detection_w": self.pairs * per_pair,
            "stim_energy_j": stim_j,
            "stim_w": stim_j * self.stim.events_per_day / SECONDS_PER_DAY,
            "total_w": average_power(self.params, self.pairs, self.stim, self.blocks, self.lut_levels),
            "battery_years": battery_life(self.params, self.pairs, self.stim, self.blocks, self.lut_levels),
        }


def _build(cls, overrides: dict, base=None):
    base = base if base is not None else cls()
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, raw in overrides.items():
        if key not in known:
            raise ConfigError(f"unknown {cls.__name__} field {key!r}")
        f = known[key]
        dim = f.metadata.get("dimension")
        if key == "fe_by_feature_w":
            kwargs[key] = {str(k).upper(): parse_quantity(v, "power") for k, v in raw.items()}
        elif dim == "energy_wh":
            kwargs[key] = parse_quantity(raw, "energy") / 3600.0 if isinstance(raw, (str, dict)) else float(raw)
        elif dim is not None:
            kwargs[key] = None if raw is None else parse_quantity(raw, dim)
        else:
            kwargs[key] = raw
    return replace(base, **kwargs)


_STIM_DIMS = {"current_a": "current", "pulse_width_s": "time", "duration_s": "time", "pulse_rate_hz": "frequency"}

PRESET_STIM = {"average": AVERAGE_STIMULATION, "high": HIGH_STIMULATION}


def scenario_from_dict(d: dict) -> Scenario:
    """Build a scenario from a JSON-like dict; every key is optional."""
    if not isinstance(d, dict):
        raise ParseError("scenario must be a JSON object")
    unknown = set(d) - {"name", "params", "blocks", "stim", "pairs", "lut_levels"}
    if unknown:
        raise ConfigError(f"unknown scenario keys {sorted(unknown)}")
    params = _build(SystemParams, d.get("params", {}))
    blocks = _build(BlockPower, d.get("blocks", {}))
    stim_raw = d.get("stim", "average")
    if isinstance(stim_raw, str):
        if stim_raw not in PRESET_STIM:
            raise ConfigError(f"unknown stimulation preset {stim_raw!r}")
        stim = PRESET_STIM[stim_raw]
    else:
        stim_raw = dict(stim_raw)
        base = PRESET_STIM[stim_raw.pop("preset", "average")]
        kw = {}
        for k, v in stim_raw.items():
            if k == "events_per_day":
                kw[k] = float(v)
            elif k in _STIM_DIMS:
                kw[k] = parse_quantity(v, _STIM_DIMS[k])
            else:
                raise ConfigError(f"unknown stimulation field {k!r}")
        stim = replace(base, **kw)
    return Scenario(str(d.get("name", "custom")), params, blocks, stim, int(d.get("pairs", 4)),
                    int(d.get("lut_levels", 40)))


def load_scenario(path) -> Scenario:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: malformed scenario JSON ({exc})") from exc
    return scenario_from_dict(raw)


DEFAULT_SCENARIOS = {
    "average": Scenario("average", stim=AVERAGE_STIMULATION),
    "high": Scenario("high", stim=HIGH_STIMULATION),
    "lut8": Scenario("lut8", stim=AVERAGE_STIMULATION, lut_levels=8),
}
