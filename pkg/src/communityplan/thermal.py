"""Building heat-dynamics constraints from lumped RC networks.

The continuous RC equations are discretized by explicit (forward) Euler at
the configured step and emitted as per-timestep equalities.  State nodes
per model order follow :data:`communityplan.core.RC_STATES_BY_ORDER`:
interior only (order 1), then envelope, medium, heater and sensor.  The
space-heating input feeds the heater node when present and the interior
node otherwise; solar gains enter the interior through the effective
window area and the envelope through the effective envelope area.

State variables are kept non-negative by expressing them in Kelvin inside
the model (RC terms only use differences, so the offset cancels); the
block refs convert back to degC on extraction.

Indexing: state vectors have one value per sample, ``T[0]`` pinned to the
initial set point, and the update into ``T[t]`` uses inputs at ``t - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import BuildingConfig, ClimateProfile, RC_CAPACITY_KEY, TimeSeries
from .milp import LinExpr, Model, Sense, VarRef

__all__ = [
    "KELVIN_OFFSET",
    "ThermalBlockRefs",
    "emit_thermal_constraints",
    "emit_comfort_constraints",
    "check_euler_stability",
    "simulate_thermal",
]

KELVIN_OFFSET = 273.15
SECONDS_PER_HOUR = 3600.0
W_PER_KW = 1000.0

# couplings as (node, partner, resistance key); partner "a" is ambient
_COUPLINGS: tuple[tuple[str, str, str], ...] = (
    ("i", "a", "R_ia"),
    ("i", "e", "R_ie"),
    ("e", "a", "R_ea"),
    ("i", "m", "R_im"),
    ("i", "h", "R_ih"),
    ("i", "s", "R_is"),
)


@dataclass(frozen=True)
class ThermalBlockRefs:
    """Handles to one building's thermal block inside a model."""

    states: Mapping[str, tuple[VarRef, ...]]  # Kelvin-valued state vectors
    q_sp: tuple[VarRef, ...]  # space-heat decision, kW
    horizon: int

    @property
    def t_i(self) -> tuple[VarRef, ...]:
        return self.states["i"]

    def indoor_celsius(self, values: Mapping[str, float]) -> np.ndarray:
        return np.array([values[v.name] for v in self.t_i]) - KELVIN_OFFSET

    def state_celsius(self, node: str, values: Mapping[str, float]) -> np.ndarray:
        return np.array([values[v.name] for v in self.states[node]]) - KELVIN_OFFSET

    def heat_profile(self, values: Mapping[str, float]) -> np.ndarray:
        return np.array([values[v.name] for v in self.q_sp])


def _as_array(series, horizon: int, name: str) -> np.ndarray:
    values = series.values if isinstance(series, TimeSeries) else np.asarray(series, float)
    if values.size < horizon:
        raise ValueError(f"{name}: series of length {values.size} cannot cover horizon {horizon}")
    return values[:horizon]


def _active_couplings(states: Sequence[str], resistances: Mapping[str, float]):
    for node, partner, key in _COUPLINGS:
        if key not in resistances:
            continue
        if node not in states or (partner != "a" and partner not in states):
            continue
        yield node, partner, key


def check_euler_stability(bcfg: BuildingConfig, step_hours: float) -> None:
    """Reject parameter sets the explicit-Euler update would blow up on.

    Each coupled (R, C) pair must satisfy step / (R * C) <= 2; calibrated
    sub-hourly parameters can be stiff at hourly steps.
    """
    rc = bcfg.rc
    step_s = step_hours * SECONDS_PER_HOUR
    states = rc.states()
    for node, partner, key in _active_couplings(states, rc.resistances):
        for end in (node, partner):
            if end == "a":
                continue
            cap = rc.capacities[RC_CAPACITY_KEY[end]]
            ratio = step_s / (rc.resistances[key] * cap)
            if ratio > 2.0:
                raise ValueError(
                    f"building {bcfg.id}: explicit Euler unstable for pair "
                    f"({key}, {RC_CAPACITY_KEY[end]}): step/(R*C) = {ratio:.3f} > 2"
                )


def emit_thermal_constraints(
    model: Model,
    bcfg: BuildingConfig,
    climate: ClimateProfile,
    horizon: int,
    t_init: float,
    step_hours: float = 1.0,
    tag: str = "",
) -> ThermalBlockRefs:
    """Emit the discrete heat-dynamics equalities for one building.

    ``t_init`` is the degC set point the interior state is pinned to at
    t = 0.  ``tag`` scopes variable names (typically ``b{id}_s{w}``).
    """
    rc = bcfg.rc
    for key, value in {**rc.resistances, **rc.capacities}.items():
        if not value > 0:
            raise ValueError(f"building {bcfg.id}: non-positive RC parameter {key}")
    check_euler_stability(bcfg, step_hours)
    t_amb = _as_array(climate.t_amb, horizon, "T_amb") + KELVIN_OFFSET
    i_sol = _as_array(climate.i_sol, horizon, "I_sol")
    step_s = step_hours * SECONDS_PER_HOUR
    label = tag or f"b{bcfg.id}"
    nodes = rc.states()

    states: dict[str, list[VarRef]] = {
        node: [model.add_var(f"T{node}_{label}_t{t}") for t in range(horizon)]
        for node in nodes
    }
    q_sp = [model.add_var(f"Qsp_{label}_t{t}") for t in range(horizon)]
    heat_node = "h" if "h" in nodes else "i"

    # every state starts at the initial set point; leaving non-interior
    # nodes free would let the optimizer seed warm masses at zero cost and
    # makes trajectories non-unique under fixed heating
    for node in nodes:
        model.add_constraint(
            LinExpr({states[node][0].id: 1.0}, 0.0, model._model_id),
            Sense.EQ,
            t_init + KELVIN_OFFSET,
            f"tinit_{node}_{label}",
        )

    for t in range(1, horizon):
        for node in nodes:
            cap = rc.capacities[RC_CAPACITY_KEY[node]]
            expr = LinExpr()
            expr.add(states[node][t], 1.0)
            diag = 1.0
            rhs = 0.0
            for n_from, n_to, key in _active_couplings(nodes, rc.resistances):
                gain = step_s / (rc.resistances[key] * cap)
                if n_from == node:
                    other = n_to
                elif n_to == node:
                    other = n_from
                else:
                    continue
                diag -= gain
                if other == "a":
                    rhs += gain * t_amb[t - 1]
                else:
                    expr.add(states[other][t - 1], -gain)
            expr.add(states[node][t - 1], -diag)
            if node == "i":
                rhs += rc.window_area * i_sol[t - 1] * step_s / cap
            elif node == "e":
                rhs += rc.envelope_area * i_sol[t - 1] * step_s / cap
            if node == heat_node:
                expr.add(q_sp[t - 1], -W_PER_KW * step_s / cap)
            model.add_constraint(expr, Sense.EQ, rhs, f"rc_{node}_{label}_t{t}")

    return ThermalBlockRefs(
        states={n: tuple(v) for n, v in states.items()},
        q_sp=tuple(q_sp),
        horizon=horizon,
    )


def emit_comfort_constraints(
    model: Model,
    refs: ThermalBlockRefs,
    t_set,
    buffer: float,
    tag: str = "",
) -> list[int]:
    """Lower comfort bound T_i(t) >= T_set(t) - buffer for every step.

    One sided on purpose: no cooling devices exist, the interior is free
    to float above the set point.
    """
    setpoints = _as_array(t_set, refs.horizon, "T_set")
    label = tag or "comfort"
    ids = []
    for t, var in enumerate(refs.t_i):
        ids.append(
            model.add_constraint(
                LinExpr({var.id: 1.0}, 0.0, var.model_id),
                Sense.GE,
                setpoints[t] - buffer + KELVIN_OFFSET,
                f"comf_{label}_t{t}",
            )
        )
    return ids


def simulate_thermal(
    bcfg: BuildingConfig,
    climate: ClimateProfile,
    q_sp,
    t_init: float,
    horizon: int,
    step_hours: float = 1.0,
) -> dict[str, np.ndarray]:
    """Forward-Euler replay of the same update the constraints encode.

    Returns degC trajectories per state node; used to cross-check solved
    models against an explicit simulation of fixed heating decisions.
    """
    rc = bcfg.rc
    nodes = rc.states()
    t_amb = _as_array(climate.t_amb, horizon, "T_amb")
    i_sol = _as_array(climate.i_sol, horizon, "I_sol")
    heat = _as_array(q_sp, horizon, "q_sp")
    step_s = step_hours * SECONDS_PER_HOUR
    heat_node = "h" if "h" in nodes else "i"
    traj = {node: np.empty(horizon) for node in nodes}
    for node in nodes:
        traj[node][0] = t_init
    for t in range(1, horizon):
        for node in nodes:
            cap = rc.capacities[RC_CAPACITY_KEY[node]]
            delta = 0.0
            for n_from, n_to, key in _active_couplings(nodes, rc.resistances):
                if n_from == node:
                    other = n_to
                elif n_to == node:
                    other = n_from
                else:
                    continue
                other_temp = t_amb[t - 1] if other == "a" else traj[other][t - 1]
                delta += (other_temp - traj[node][t - 1]) * step_s / (
                    rc.resistances[key] * cap
                )
            if node == "i":
                delta += rc.window_area * i_sol[t - 1] * step_s / cap
            elif node == "e":
                delta += rc.envelope_area * i_sol[t - 1] * step_s / cap
            if node == heat_node:
                delta += W_PER_KW * heat[t - 1] * step_s / cap
            traj[node][t] = traj[node][t - 1] + delta
    return traj
