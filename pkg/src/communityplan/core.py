"""Domain types shared by every other module.

Unit conventions used throughout the package:

* power            kW      (electric and thermal)
* energy           kWh
* temperature      degC    (RC dynamics only use differences, so the
                            offset against Kelvin is immaterial)
* solar irradiance W/m2
* areas            m2
* prices           EUR/kWh (gas is carried in kWh of higher heating
                            value, which keeps boiler efficiency
                            dimensionless)
* thermal resistance K/W, thermal capacity J/K
* time step        hours

All types are plain frozen dataclasses: immutable after construction and
safe to share between concurrent workers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import Mapping

import numpy as np

__all__ = [
    "Unit",
    "TimeSeries",
    "RCParameters",
    "DeviceKind",
    "DeviceSpec",
    "BuildingConfig",
    "CommunityConfig",
    "OccupantProfile",
    "EconomicProfile",
    "ClimateProfile",
    "Scenario",
    "STORAGE_KINDS",
    "validate_config",
    "validate_scenario",
    "align_scenarios",
    "scenario_channels",
    "scenario_length",
]


class Unit(str, enum.Enum):
    """Physical unit carried by a :class:`TimeSeries`."""

    DEGC = "degC"
    KILOWATT = "kW"
    KILOWATT_HOUR = "kWh"
    EUR_PER_KWH = "EUR/kWh"
    WATT_PER_M2 = "W/m2"


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled series, one value per time step.

    ``start`` anchors the series to the calendar (fixed-offset timestamps
    only, no timezone arithmetic).
    """

    start: datetime
    step_hours: float
    values: np.ndarray
    unit: Unit

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("TimeSeries values must be a non-empty 1-D array")
        if not np.all(np.isfinite(arr)):
            raise ValueError("TimeSeries values must all be finite")
        if not self.step_hours > 0:
            raise ValueError("TimeSeries step_hours must be > 0")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "unit", Unit(self.unit))

    def __len__(self) -> int:
        return int(self.values.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            self.start == other.start
            and self.step_hours == other.step_hours
            and self.unit == other.unit
            and np.array_equal(self.values, other.values)
        )

    def truncated(self, n: int) -> "TimeSeries":
        """First ``n`` samples as a new series."""
        if n > len(self):
            raise ValueError(f"cannot truncate length {len(self)} to {n}")
        return TimeSeries(self.start, self.step_hours, self.values[:n], self.unit)


# RC state nodes per model order.  Order 1 is a single interior node; each
# further order adds envelope, medium, heater and sensor nodes in that
# sequence, so the heater node exists from order 4 on and the space-heat
# input falls back to the interior node below that.
RC_STATES_BY_ORDER: dict[int, tuple[str, ...]] = {
    1: ("i",),
    2: ("i", "e"),
    3: ("i", "e", "m"),
    4: ("i", "e", "m", "h"),
    5: ("i", "e", "m", "h", "s"),
}

# Couplings required at each order: (resistance key, node the coupling is
# attached to).  The interior-ambient path R_ia exists at every order.
RC_RESISTANCES_BY_ORDER: dict[int, tuple[str, ...]] = {
    1: ("R_ia",),
    2: ("R_ia", "R_ie", "R_ea"),
    3: ("R_ia", "R_ie", "R_ea", "R_im"),
    4: ("R_ia", "R_ie", "R_ea", "R_im", "R_ih"),
    5: ("R_ia", "R_ie", "R_ea", "R_im", "R_ih", "R_is"),
}

RC_CAPACITY_KEY: dict[str, str] = {
    "i": "C_i",
    "e": "C_e",
    "m": "C_m",
    "h": "C_h",
    "s": "C_s",
}


@dataclass(frozen=True)
class RCParameters:
    """Lumped resistance-capacitance thermal network of one building.

    ``order`` picks the state set from :data:`RC_STATES_BY_ORDER`;
    ``resistances``/``capacities`` must carry exactly the keys that order
    requires. ``window_area`` scales solar gains into the interior node,
    ``envelope_area`` into the envelope node (orders >= 2).
    """

    order: int
    resistances: Mapping[str, float]
    capacities: Mapping[str, float]
    window_area: float
    envelope_area: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "resistances", dict(self.resistances))
        object.__setattr__(self, "capacities", dict(self.capacities))

    def states(self) -> tuple[str, ...]:
        return RC_STATES_BY_ORDER[self.order]


class DeviceKind(str, enum.Enum):
    """Technology identifier, community-level variants suffixed _COM."""

    BAT = "BAT"
    TES = "TES"
    BOL = "BOL"
    HP = "HP"
    PV = "PV"
    STC = "STC"
    EL = "EL"
    HYD = "HYD"
    FC = "FC"
    PV_COM = "PV_COM"
    BAT_COM = "BAT_COM"


STORAGE_KINDS = frozenset(
    {DeviceKind.BAT, DeviceKind.BAT_COM, DeviceKind.TES, DeviceKind.HYD}
)

# extra-map keys each kind must provide
_REQUIRED_EXTRA: dict[DeviceKind, tuple[str, ...]] = {
    DeviceKind.BOL: ("eta",),
    DeviceKind.HP: ("cop_coeffs", "t_dist"),
    DeviceKind.PV: ("eta",),
    DeviceKind.PV_COM: ("eta",),
    DeviceKind.STC: ("eta", "u_loss", "t_collector"),
}


@dataclass(frozen=True)
class DeviceSpec:
    """Techno-economic description of one installable unit.

    ``cap_min``/``cap_max`` bound the design variable (kWh for storage,
    kW for converters, m2 for collectors).  ``size_price`` is the relative
    sizing price in EUR per design unit, ``base_price`` the fixed price of
    existence, both levelized over ``lifetime_years`` in the objective.
    ``sigma`` is the per-step state retention of storage (1 = lossless),
    ``gamma_ch``/``gamma_dch`` the power-to-capacity rate coefficients in
    1/h.  Kind-specific parameters live in ``extra``:

    * BOL: ``eta`` conversion efficiency
    * HP:  ``cop_coeffs`` [a1, a2, a3, a4], ``t_dist`` distribution degC
    * PV / PV_COM: ``eta`` panel efficiency
    * STC: ``eta``, ``u_loss`` W/m2K, ``t_collector`` degC
    * storage kinds: optional ``state_min`` kWh floor of the stored energy
    """

    kind: DeviceKind
    cap_min: float
    cap_max: float
    eta_ch: float = 1.0
    eta_dch: float = 1.0
    sigma: float = 1.0
    gamma_ch: float = 1.0
    gamma_dch: float = 1.0
    size_price: float = 0.0
    base_price: float = 0.0
    lifetime_years: float = 20.0
    extra: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", DeviceKind(self.kind))
        object.__setattr__(self, "extra", dict(self.extra))

    def state_min(self) -> float:
        return float(self.extra.get("state_min", 0.0))


@dataclass(frozen=True)
class BuildingConfig:
    """One building: thermal model, roof budget and installable devices."""

    id: int
    rc: RCParameters
    roof_area: float
    comfort_buffer: float = 0.5
    devices: tuple[DeviceSpec, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "devices", tuple(self.devices))


@dataclass(frozen=True)
class CommunityConfig:
    """Building roster, shared devices, grid limits and horizon settings."""

    buildings: tuple[BuildingConfig, ...]
    community_devices: tuple[DeviceSpec, ...] = ()
    lv_limit: float = 17.25
    mv_limit: float = 400.0
    slack_price: float = 1e5
    discount_rate: float = 0.05
    horizon_steps: int = 8760
    step_hours: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "buildings", tuple(self.buildings))
        object.__setattr__(self, "community_devices", tuple(self.community_devices))


@dataclass(frozen=True)
class OccupantProfile:
    """Fixed base electric load and thermostat set points of one building."""

    e_base: TimeSeries
    t_set: TimeSeries


@dataclass(frozen=True)
class EconomicProfile:
    p_el: TimeSeries
    p_gas: TimeSeries
    p_co2: TimeSeries


@dataclass(frozen=True)
class ClimateProfile:
    t_amb: TimeSeries
    i_sol: TimeSeries


@dataclass(frozen=True)
class Scenario:
    """One synthetic year with its realization probability."""

    id: str
    probability: float
    occupant: Mapping[int, OccupantProfile]
    economic: EconomicProfile
    climate: ClimateProfile

    def __post_init__(self) -> None:
        object.__setattr__(self, "occupant", dict(self.occupant))


def scenario_channels(scenario: Scenario) -> dict[str, TimeSeries]:
    """Flat channel-name -> series view, stable ordering.

    Climate and economic channels come first, then per-building occupant
    channels sorted by building id.
    """
    out: dict[str, TimeSeries] = {
        "T_amb": scenario.climate.t_amb,
        "I_sol": scenario.climate.i_sol,
        "p_el": scenario.economic.p_el,
        "p_gas": scenario.economic.p_gas,
        "p_co2": scenario.economic.p_co2,
    }
    for bid in sorted(scenario.occupant):
        out[f"E_base_b{bid}"] = scenario.occupant[bid].e_base
        out[f"T_set_b{bid}"] = scenario.occupant[bid].t_set
    return out


def scenario_length(scenario: Scenario) -> int:
    return len(scenario.climate.t_amb)


def validate_scenario(scenario: Scenario) -> list[str]:
    """Internal consistency: all member series share length and step."""
    violations: list[str] = []
    channels = scenario_channels(scenario)
    ref_name = next(iter(channels))
    ref = channels[ref_name]
    for name, series in channels.items():
        if len(series) != len(ref):
            violations.append(
                f"scenario {scenario.id}: {name}: length {len(series)} != "
                f"{ref_name} length {len(ref)}"
            )
        if series.step_hours != ref.step_hours:
            violations.append(
                f"scenario {scenario.id}: {name}: step {series.step_hours} != "
                f"{ref_name} step {ref.step_hours}"
            )
    if scenario.probability < 0:
        violations.append(f"scenario {scenario.id}: probability >= 0")
    return violations


def _validate_device(spec: DeviceSpec, path: str, violations: list[str]) -> None:
    if not 0 <= spec.sigma <= 1:
        violations.append(f"{path}.sigma: requires 0 <= sigma <= 1")
    for name in ("eta_ch", "eta_dch"):
        eta = getattr(spec, name)
        if not 0 < eta <= 1:
            violations.append(f"{path}.{name}: requires 0 < eta_* <= 1")
    if not spec.cap_min <= spec.cap_max:
        violations.append(f"{path}: requires cap_min <= cap_max")
    if spec.cap_min < 0:
        violations.append(f"{path}.cap_min: requires cap_min >= 0")
    if not spec.lifetime_years >= 1:
        violations.append(f"{path}.lifetime_years: requires tau >= 1")
    if spec.gamma_ch < 0 or spec.gamma_dch < 0:
        violations.append(f"{path}: requires gamma_* >= 0")
    for key in _REQUIRED_EXTRA.get(spec.kind, ()):
        if key not in spec.extra:
            violations.append(f"{path}.extra: missing required key '{key}'")
    if spec.kind == DeviceKind.HP and "cop_coeffs" in spec.extra:
        coeffs = spec.extra["cop_coeffs"]
        if not (isinstance(coeffs, (list, tuple)) and len(coeffs) == 4):
            violations.append(f"{path}.extra.cop_coeffs: requires 4 coefficients")


def _validate_rc(rc: RCParameters, path: str, violations: list[str]) -> None:
    if rc.order not in RC_STATES_BY_ORDER:
        violations.append(f"{path}.order: requires order in 1..5")
        return
    required_r = set(RC_RESISTANCES_BY_ORDER[rc.order])
    required_c = {RC_CAPACITY_KEY[s] for s in rc.states()}
    have_r, have_c = set(rc.resistances), set(rc.capacities)
    if have_r != required_r:
        violations.append(
            f"{path}.resistances: order {rc.order} requires keys "
            f"{sorted(required_r)}, got {sorted(have_r)}"
        )
    if have_c != required_c:
        violations.append(
            f"{path}.capacities: order {rc.order} requires keys "
            f"{sorted(required_c)}, got {sorted(have_c)}"
        )
    for key, value in {**rc.resistances, **rc.capacities}.items():
        if not (value > 0 and math.isfinite(value)):
            violations.append(f"{path}.{key}: requires strictly positive value")
    if rc.window_area < 0:
        violations.append(f"{path}.window_area: requires >= 0")
    if rc.envelope_area < 0:
        violations.append(f"{path}.envelope_area: requires >= 0")


def validate_config(cfg: CommunityConfig) -> list[str]:
    """All declared invariants of the configuration tree.

    Returns an empty list iff the configuration is sound; every entry
    names the offending path and the violated rule.  Pure diagnostic, no
    exceptions.
    """
    violations: list[str] = []
    if not cfg.lv_limit > 0:
        violations.append("lv_limit: requires lv_limit > 0")
    if not cfg.mv_limit > 0:
        violations.append("mv_limit: requires mv_limit > 0")
    if not 0 < cfg.discount_rate < 1:
        violations.append("discount_rate: requires 0 < discount_rate < 1")
    if not cfg.step_hours > 0:
        violations.append("step_hours: requires step_hours > 0")
    if not cfg.horizon_steps >= 1:
        violations.append("horizon_steps: requires horizon_steps >= 1")
    if cfg.slack_price < 0:
        violations.append("slack_price: requires slack_price >= 0")
    if not cfg.buildings:
        violations.append("buildings: requires at least one building")
    seen_ids: set[int] = set()
    for idx, bld in enumerate(cfg.buildings):
        path = f"buildings[{idx}]"
        if bld.id in seen_ids:
            violations.append(f"{path}.id: duplicate building id {bld.id}")
        seen_ids.add(bld.id)
        if bld.roof_area < 0:
            violations.append(f"{path}.roof_area: requires roof_area >= 0")
        if bld.comfort_buffer < 0:
            violations.append(f"{path}.comfort_buffer: requires comfort_buffer >= 0")
        _validate_rc(bld.rc, f"{path}.rc", violations)
        for didx, spec in enumerate(bld.devices):
            _validate_device(spec, f"{path}.devices[{didx}]", violations)
    for didx, spec in enumerate(cfg.community_devices):
        _validate_device(spec, f"community_devices[{didx}]", violations)
    return violations


def align_scenarios(scenarios: list[Scenario]) -> list[Scenario]:
    """Truncate all scenarios to the common length and renormalize pi.

    Scenario probabilities are rescaled so they sum to one (to 1e-12).
    Raises ``ValueError`` on an empty input, mismatched step sizes, or an
    all-zero probability mass.
    """
    if not scenarios:
        raise ValueError("align_scenarios requires at least one scenario")
    steps = {s.climate.t_amb.step_hours for s in scenarios}
    for s in scenarios:
        for series in scenario_channels(s).values():
            steps.add(series.step_hours)
    if len(steps) != 1:
        raise ValueError(f"incompatible scenario step sizes: {sorted(steps)}")
    common = min(
        min(len(series) for series in scenario_channels(s).values())
        for s in scenarios
    )
    total = sum(s.probability for s in scenarios)
    if total <= 0:
        raise ValueError("scenario probabilities sum to zero")

    def _trim(s: Scenario) -> Scenario:
        return Scenario(
            id=s.id,
            probability=s.probability / total,
            occupant={
                bid: OccupantProfile(p.e_base.truncated(common), p.t_set.truncated(common))
                for bid, p in s.occupant.items()
            },
            economic=EconomicProfile(
                s.economic.p_el.truncated(common),
                s.economic.p_gas.truncated(common),
                s.economic.p_co2.truncated(common),
            ),
            climate=ClimateProfile(
                s.climate.t_amb.truncated(common),
                s.climate.i_sol.truncated(common),
            ),
        )

    return [_trim(s) for s in scenarios]
