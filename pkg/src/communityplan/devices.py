"""MILP blocks for storage, conversion and renewable devices plus the
building and community energy balances.

Every device gets a binary existence variable gating its design variable
into [cap_min, cap_max] or zero.  Design variables are first stage: for
multi-scenario models they are created once per entity through
:func:`emit_design` (or :func:`emit_hydrogen_design`) and handed to the
per-scenario emitters, which add the operational variables and
constraints; called without one, each emitter creates its own design.

Storage bookkeeping: state vectors have ``horizon + 1`` entries, flows
``horizon``; per-step stored energy is power times step length, so

    E(t+1) = E(t) * sigma + (ch(t) * eta_ch - dch(t) / eta_dch) * t_s

with the relaxed cyclic bound E(0) <= E(horizon).  The initial state is a
free decision bounded only by the state limits and the cyclic inequality.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import DeviceKind, DeviceSpec, TimeSeries
from .milp import LinExpr, Model, Sense, VarRef

__all__ = [
    "DesignRefs",
    "DeviceBlockRefs",
    "BuildingEnergyRefs",
    "emit_design",
    "emit_hydrogen_design",
    "emit_battery",
    "emit_tes",
    "emit_boiler",
    "emit_heat_pump",
    "emit_pv",
    "emit_stc",
    "emit_roof_coupling",
    "emit_hydrogen_chain",
    "emit_building_balances",
    "emit_community_balance",
    "cop_profile",
    "stc_yield_profile",
    "simulate_storage",
]

W_PER_KW = 1000.0


@dataclass(frozen=True)
class DesignRefs:
    """First-stage variables of one device (or device chain).

    ``entries`` pairs every design variable with its techno-economic
    spec; all of them share the single existence binary ``chi``.
    """

    chi: VarRef
    design: VarRef
    entries: tuple[tuple[DeviceSpec, VarRef], ...]


@dataclass(frozen=True)
class DeviceBlockRefs:
    """One device's handles: design plus per-timestep operational vectors."""

    kind: DeviceKind
    design: DesignRefs
    flows: Mapping[str, tuple[VarRef, ...]]
    state: tuple[VarRef, ...] | None = None

    @property
    def chi(self) -> VarRef:
        return self.design.chi


@dataclass(frozen=True)
class BuildingEnergyRefs:
    """Grid-exchange vectors of one building and its balance constraints."""

    e_in: tuple[VarRef, ...]
    e_out: tuple[VarRef, ...]
    heat_ids: tuple[int, ...]
    elec_ids: tuple[int, ...]


def _as_array(series, horizon: int, name: str) -> np.ndarray:
    values = series.values if isinstance(series, TimeSeries) else np.asarray(series, float)
    if values.size < horizon:
        raise ValueError(f"{name}: series of length {values.size} cannot cover horizon {horizon}")
    return values[:horizon]


def emit_design(model: Model, spec: DeviceSpec, tag: str) -> DesignRefs:
    """Existence binary plus gated design variable for one device.

    The gating pair ``chi*cap_min <= design <= chi*cap_max`` forces the
    design to zero unless the device exists.
    """
    prefix = "A" if spec.kind in (DeviceKind.PV, DeviceKind.PV_COM, DeviceKind.STC) else "C"
    chi = model.add_binary(f"chi_{spec.kind.value}_{tag}")
    design = model.add_var(f"{prefix}_{spec.kind.value}_{tag}", hi=spec.cap_max)
    model.add_constraint(
        design - spec.cap_min * chi, Sense.GE, 0.0, f"gate_lo_{spec.kind.value}_{tag}"
    )
    model.add_constraint(
        design - spec.cap_max * chi, Sense.LE, 0.0, f"gate_hi_{spec.kind.value}_{tag}"
    )
    return DesignRefs(chi=chi, design=design, entries=((spec, design),))


def emit_hydrogen_design(
    model: Model, specs: Mapping[DeviceKind, DeviceSpec], tag: str
) -> DesignRefs:
    """Three design variables (electrolyzer, tank, fuel cell) under one
    existence binary."""
    for kind in (DeviceKind.EL, DeviceKind.HYD, DeviceKind.FC):
        if kind not in specs:
            raise ValueError(f"hydrogen chain requires a {kind.value} spec")
    chi = model.add_binary(f"chi_HYD_{tag}")
    entries = []
    designs = {}
    for kind in (DeviceKind.EL, DeviceKind.HYD, DeviceKind.FC):
        spec = specs[kind]
        var = model.add_var(f"C_{kind.value}_{tag}", hi=spec.cap_max)
        model.add_constraint(
            var - spec.cap_min * chi, Sense.GE, 0.0, f"gate_lo_{kind.value}_{tag}"
        )
        model.add_constraint(
            var - spec.cap_max * chi, Sense.LE, 0.0, f"gate_hi_{kind.value}_{tag}"
        )
        entries.append((spec, var))
        designs[kind] = var
    return DesignRefs(chi=chi, design=designs[DeviceKind.HYD], entries=tuple(entries))


def _emit_storage(
    model: Model,
    spec: DeviceSpec,
    horizon: int,
    step_hours: float,
    tag: str,
    design: DesignRefs,
    flow_symbol: str,
) -> DeviceBlockRefs:
    if horizon < 2:
        raise ValueError("storage blocks need a horizon of at least 2 steps")
    kind = spec.kind.value
    state_min = spec.state_min()
    state = [
        model.add_var(f"E_{kind}_{tag}_t{t}", lo=state_min) for t in range(horizon + 1)
    ]
    charge = [model.add_var(f"{flow_symbol}ch_{kind}_{tag}_t{t}") for t in range(horizon)]
    discharge = [
        model.add_var(f"{flow_symbol}dch_{kind}_{tag}_t{t}") for t in range(horizon)
    ]
    cap = design.design
    for t in range(horizon + 1):
        model.add_constraint(state[t] - cap, Sense.LE, 0.0, f"cap_{kind}_{tag}_t{t}")
    for t in range(horizon):
        model.add_constraint(
            charge[t] - spec.gamma_ch * cap, Sense.LE, 0.0, f"rate_ch_{kind}_{tag}_t{t}"
        )
        model.add_constraint(
            discharge[t] - spec.gamma_dch * cap,
            Sense.LE,
            0.0,
            f"rate_dch_{kind}_{tag}_t{t}",
        )
        recursion = (
            state[t + 1]
            - spec.sigma * state[t]
            - spec.eta_ch * step_hours * charge[t]
            + (step_hours / spec.eta_dch) * discharge[t]
        )
        model.add_constraint(recursion, Sense.EQ, 0.0, f"soc_{kind}_{tag}_t{t}")
    model.add_constraint(state[0] - state[horizon], Sense.LE, 0.0, f"cyc_{kind}_{tag}")
    return DeviceBlockRefs(
        kind=spec.kind,
        design=design,
        flows={"charge": tuple(charge), "discharge": tuple(discharge)},
        state=tuple(state),
    )


def emit_battery(
    model: Model,
    spec: DeviceSpec,
    horizon: int,
    step_hours: float = 1.0,
    tag: str = "bat",
    design: DesignRefs | None = None,
) -> DeviceBlockRefs:
    if spec.kind not in (DeviceKind.BAT, DeviceKind.BAT_COM):
        raise ValueError(f"emit_battery got kind {spec.kind}")
    design = design or emit_design(model, spec, tag)
    return _emit_storage(model, spec, horizon, step_hours, tag, design, "E")


def emit_tes(
    model: Model,
    spec: DeviceSpec,
    horizon: int,
    step_hours: float = 1.0,
    tag: str = "tes",
    design: DesignRefs | None = None,
) -> DeviceBlockRefs:
    if spec.kind != DeviceKind.TES:
        raise ValueError(f"emit_tes got kind {spec.kind}")
    design = design or emit_design(model, spec, tag)
    return _emit_storage(model, spec, horizon, step_hours, tag, design, "Q")


def emit_boiler(
    model: Model,
    spec: DeviceSpec,
    horizon: int,
    tag: str = "bol",
    design: DesignRefs | None = None,
) -> DeviceBlockRefs:
    if spec.kind != DeviceKind.BOL:
        raise ValueError(f"emit_boiler got kind {spec.kind}")
    design = design or emit_design(model, spec, tag)
    eta = float(spec.extra["eta"])
    heat = [model.add_var(f"Q_BOL_{tag}_t{t}") for t in range(horizon)]
    gas = [model.add_var(f"Vgas_{tag}_t{t}") for t in range(horizon)]
    for t in range(horizon):
        model.add_constraint(
            heat[t] - eta * gas[t], Sense.EQ, 0.0, f"conv_BOL_{tag}_t{t}"
        )
        model.add_constraint(
            heat[t] - design.design, Sense.LE, 0.0, f"cap_BOL_{tag}_t{t}"
        )
    return DeviceBlockRefs(
        kind=spec.kind,
        design=design,
        flows={"heat": tuple(heat), "gas": tuple(gas)},
    )


def cop_profile(spec: DeviceSpec, t_amb) -> np.ndarray:
    """Pre-calculated COP as a double exponential of the distribution to
    ambient temperature gap."""
    a1, a2, a3, a4 = (float(c) for c in spec.extra["cop_coeffs"])
    t_dist = float(spec.extra["t_dist"])
    gap = t_dist - np.asarray(
        t_amb.values if isinstance(t_amb, TimeSeries) else t_amb, float
    )
    return a1 * np.exp(a2 * gap) + a3 * np.exp(a4 * gap)


def emit_heat_pump(
    model: Model,
    spec: DeviceSpec,
    t_amb,
    horizon: int,
    tag: str = "hp",
    design: DesignRefs | None = None,
) -> DeviceBlockRefs:
    if spec.kind != DeviceKind.HP:
        raise ValueError(f"emit_heat_pump got kind {spec.kind}")
    cop = cop_profile(spec, _as_array(t_amb, horizon, "T_amb"))
    if np.any(cop <= 0):
        bad = int(np.argmax(cop <= 0))
        raise ValueError(f"heat pump COP non-positive at step {bad}: {cop[bad]:.4f}")
    design = design or emit_design(model, spec, tag)
    heat = [model.add_var(f"Q_HP_{tag}_t{t}") for t in range(horizon)]
    power = [model.add_var(f"E_HP_{tag}_t{t}") for t in range(horizon)]
    for t in range(horizon):
        model.add_constraint(
            heat[t] - cop[t] * power[t], Sense.EQ, 0.0, f"conv_HP_{tag}_t{t}"
        )
        model.add_constraint(
            heat[t] - design.design, Sense.LE, 0.0, f"cap_HP_{tag}_t{t}"
        )
    return DeviceBlockRefs(
        kind=spec.kind,
        design=design,
        flows={"heat": tuple(heat), "power": tuple(power)},
    )


def emit_pv(
    model: Model,
    spec: DeviceSpec,
    i_sol,
    roof_cap: float,
    horizon: int,
    tag: str = "pv",
    design: DesignRefs | None = None,
) -> DeviceBlockRefs:
    if spec.kind not in (DeviceKind.PV, DeviceKind.PV_COM):
        raise ValueError(f"emit_pv got kind {spec.kind}")
    if design is None:
        capped = DeviceSpec(
            kind=spec.kind,
            cap_min=min(spec.cap_min, roof_cap),
            cap_max=min(spec.cap_max, roof_cap),
            size_price=spec.size_price,
            base_price=spec.base_price,
            lifetime_years=spec.lifetime_years,
            extra=spec.extra,
        )
        design = emit_design(model, capped, tag)
    irr = _as_array(i_sol, horizon, "I_sol")
    eta = float(spec.extra["eta"])
    out = [model.add_var(f"E_{spec.kind.value}_{tag}_t{t}") for t in range(horizon)]
    for t in range(horizon):
        coef = irr[t] * eta / W_PER_KW  # kW output per m2 of panel
        model.add_constraint(
            out[t] - coef * design.design, Sense.EQ, 0.0, f"conv_{spec.kind.value}_{tag}_t{t}"
        )
    return DeviceBlockRefs(kind=spec.kind, design=design, flows={"power": tuple(out)})


def stc_yield_profile(spec: DeviceSpec, i_sol, t_amb) -> np.ndarray:
    """kW of collector heat per m2, clamped at zero.

    The loss term can exceed the irradiance (night, cold sky); a real
    collector is valved off then, so the negative pre-factor is clamped
    before it ever multiplies the design area.
    """
    eta = float(spec.extra["eta"])
    u_loss = float(spec.extra["u_loss"])
    t_col = float(spec.extra["t_collector"])
    irr = np.asarray(i_sol.values if isinstance(i_sol, TimeSeries) else i_sol, float)
    amb = np.asarray(t_amb.values if isinstance(t_amb, TimeSeries) else t_amb, float)
    raw = eta * (irr - u_loss * (t_col - amb)) / W_PER_KW
    return np.maximum(raw, 0.0)


def emit_stc(
    model: Model,
    spec: DeviceSpec,
    i_sol,
    t_amb,
    roof_cap: float,
    horizon: int,
    tag: str = "stc",
    design: DesignRefs | None = None,
) -> DeviceBlockRefs:
    if spec.kind != DeviceKind.STC:
        raise ValueError(f"emit_stc got kind {spec.kind}")
    if design is None:
        capped = DeviceSpec(
            kind=spec.kind,
            cap_min=min(spec.cap_min, roof_cap),
            cap_max=min(spec.cap_max, roof_cap),
            size_price=spec.size_price,
            base_price=spec.base_price,
            lifetime_years=spec.lifetime_years,
            extra=spec.extra,
        )
        design = emit_design(model, capped, tag)
    coefs = stc_yield_profile(
        spec, _as_array(i_sol, horizon, "I_sol"), _as_array(t_amb, horizon, "T_amb")
    )
    heat = [model.add_var(f"Q_STC_{tag}_t{t}") for t in range(horizon)]
    for t in range(horizon):
        model.add_constraint(
            heat[t] - coefs[t] * design.design, Sense.EQ, 0.0, f"conv_STC_{tag}_t{t}"
        )
    return DeviceBlockRefs(kind=spec.kind, design=design, flows={"heat": tuple(heat)})


def emit_roof_coupling(
    model: Model,
    pv_refs: DeviceBlockRefs | None,
    stc_refs: DeviceBlockRefs | None,
    roof_area: float,
    tag: str = "roof",
) -> int | None:
    """Shared roof budget: the PV and collector areas fit side by side."""
    expr = LinExpr()
    if pv_refs is not None:
        expr.add(pv_refs.design.design, 1.0)
    if stc_refs is not None:
        expr.add(stc_refs.design.design, 1.0)
    if not expr.terms:
        return None
    return model.add_constraint(expr, Sense.LE, roof_area, f"roof_{tag}")


def emit_hydrogen_chain(
    model: Model,
    specs: Mapping[DeviceKind, DeviceSpec],
    horizon: int,
    step_hours: float = 1.0,
    tag: str = "COM",
    design: DesignRefs | None = None,
) -> DeviceBlockRefs:
    """Electrolyzer, pressurized tank and fuel cell in series.

    The tank state is counted in electricity-equivalent kWh at the tank
    boundary (compressor losses folded into the electrolyzer charging
    efficiency); the electrolyzer capacity caps electrical input, the
    fuel cell capacity electrical output.
    """
    if horizon < 2:
        raise ValueError("storage blocks need a horizon of at least 2 steps")
    design = design or emit_hydrogen_design(model, specs, tag)
    spec_el, spec_hyd, spec_fc = (
        specs[DeviceKind.EL],
        specs[DeviceKind.HYD],
        specs[DeviceKind.FC],
    )
    cap_el = design.entries[0][1]
    cap_hyd = design.entries[1][1]
    cap_fc = design.entries[2][1]
    state = [
        model.add_var(f"E_HYD_{tag}_t{t}", lo=spec_hyd.state_min())
        for t in range(horizon + 1)
    ]
    charge = [model.add_var(f"Ech_EL_{tag}_t{t}") for t in range(horizon)]
    discharge = [model.add_var(f"Edch_FC_{tag}_t{t}") for t in range(horizon)]
    for t in range(horizon + 1):
        model.add_constraint(state[t] - cap_hyd, Sense.LE, 0.0, f"cap_HYD_{tag}_t{t}")
    for t in range(horizon):
        model.add_constraint(
            charge[t] - spec_el.gamma_ch * cap_el, Sense.LE, 0.0, f"rate_EL_{tag}_t{t}"
        )
        model.add_constraint(
            discharge[t] - spec_fc.gamma_dch * cap_fc,
            Sense.LE,
            0.0,
            f"rate_FC_{tag}_t{t}",
        )
        recursion = (
            state[t + 1]
            - spec_hyd.sigma * state[t]
            - spec_el.eta_ch * step_hours * charge[t]
            + (step_hours / spec_fc.eta_dch) * discharge[t]
        )
        model.add_constraint(recursion, Sense.EQ, 0.0, f"soc_HYD_{tag}_t{t}")
    model.add_constraint(state[0] - state[horizon], Sense.LE, 0.0, f"cyc_HYD_{tag}")
    return DeviceBlockRefs(
        kind=DeviceKind.HYD,
        design=design,
        flows={"charge": tuple(charge), "discharge": tuple(discharge)},
        state=tuple(state),
    )


def emit_building_balances(
    model: Model,
    blocks: Mapping[DeviceKind, DeviceBlockRefs],
    q_sp: Sequence[VarRef],
    e_base,
    horizon: int,
    tag: str = "b",
) -> BuildingEnergyRefs:
    """Heat and electricity balances tying the building's devices to the
    space-heat decision, the fixed base load and the LV grid exchange.

    Heat demand side: space heat plus storage charging; supply side: heat
    pump, boiler and storage discharge.  Electricity demand side: base
    load, battery charging, heat pump input and export; supply side:
    battery discharge, PV and import.
    """
    base = _as_array(e_base, horizon, "E_base")
    e_in = [model.add_var(f"Ein_{tag}_t{t}") for t in range(horizon)]
    e_out = [model.add_var(f"Eout_{tag}_t{t}") for t in range(horizon)]
    heat_ids = []
    elec_ids = []
    tes = blocks.get(DeviceKind.TES)
    boiler = blocks.get(DeviceKind.BOL)
    hp = blocks.get(DeviceKind.HP)
    battery = blocks.get(DeviceKind.BAT)
    pv = blocks.get(DeviceKind.PV)
    for t in range(horizon):
        heat = LinExpr()
        heat.add(q_sp[t], 1.0)
        if tes is not None:
            heat.add(tes.flows["charge"][t], 1.0)
            heat.add(tes.flows["discharge"][t], -1.0)
        if boiler is not None:
            heat.add(boiler.flows["heat"][t], -1.0)
        if hp is not None:
            heat.add(hp.flows["heat"][t], -1.0)
        heat_ids.append(model.add_constraint(heat, Sense.EQ, 0.0, f"heat_{tag}_t{t}"))

        elec = LinExpr()
        elec.add(e_out[t], 1.0)
        elec.add(e_in[t], -1.0)
        if battery is not None:
            elec.add(battery.flows["charge"][t], 1.0)
            elec.add(battery.flows["discharge"][t], -1.0)
        if hp is not None:
            elec.add(hp.flows["power"][t], 1.0)
        if pv is not None:
            elec.add(pv.flows["power"][t], -1.0)
        elec_ids.append(
            model.add_constraint(elec, Sense.EQ, -base[t], f"elec_{tag}_t{t}")
        )
    return BuildingEnergyRefs(
        e_in=tuple(e_in),
        e_out=tuple(e_out),
        heat_ids=tuple(heat_ids),
        elec_ids=tuple(elec_ids),
    )


def emit_community_balance(
    model: Model,
    com_blocks: Mapping[DeviceKind, DeviceBlockRefs],
    mv_to_lv: Sequence[VarRef],
    lv_to_mv: Sequence[VarRef],
    horizon: int,
    tag: str = "COM",
) -> tuple[tuple[VarRef, ...], tuple[int, ...]]:
    """Medium-voltage bus balance linking community devices, the LV feeder
    exchange and the high-voltage import.

    Creates and returns the HV import vector (the community draws from
    but never sells to the HV grid) together with the constraint ids.
    """
    hv_in = [model.add_var(f"Ehv_{tag}_t{t}") for t in range(horizon)]
    battery = com_blocks.get(DeviceKind.BAT_COM)
    pv = com_blocks.get(DeviceKind.PV_COM)
    hyd = com_blocks.get(DeviceKind.HYD)
    ids = []
    for t in range(horizon):
        expr = LinExpr()
        expr.add(mv_to_lv[t], 1.0)
        expr.add(lv_to_mv[t], -1.0)
        expr.add(hv_in[t], -1.0)
        if battery is not None:
            expr.add(battery.flows["charge"][t], 1.0)
            expr.add(battery.flows["discharge"][t], -1.0)
        if hyd is not None:
            expr.add(hyd.flows["charge"][t], 1.0)
            expr.add(hyd.flows["discharge"][t], -1.0)
        if pv is not None:
            expr.add(pv.flows["power"][t], -1.0)
        ids.append(model.add_constraint(expr, Sense.EQ, 0.0, f"combal_{tag}_t{t}"))
    return tuple(hv_in), tuple(ids)


def simulate_storage(
    initial: float,
    charge,
    discharge,
    eta_ch: float,
    eta_dch: float,
    sigma: float,
    step_hours: float = 1.0,
) -> np.ndarray:
    """Scalar replay of the storage recursion, for cross-checking solved
    trajectories."""
    ch = np.asarray(charge, float)
    dch = np.asarray(discharge, float)
    out = np.empty(ch.size + 1)
    out[0] = initial
    for t in range(ch.size):
        out[t + 1] = out[t] * sigma + (ch[t] * eta_ch - dch[t] / eta_dch) * step_hours
    return out
