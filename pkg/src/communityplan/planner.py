"""Build and solve the community planning problems.

Three entry points sit on top of the block emitters:

* :func:`build_centralized` / :func:`solve_centralized`: the two-stage
  stochastic program with design variables shared across scenarios and
  all operational blocks replicated per scenario.
* :func:`solve_distributed`: the sequential coordination scheme.  Each
  sub-problem is one building plus the full community block; buildings
  are solved in ascending id order, each solve sees the other buildings'
  latest net flows as a fixed parameter series, and full sweeps repeat
  until the global objective moves less than epsilon.
* :func:`run_sensitivity`: one-at-a-time deterministic solves per
  uncertainty factor with the other factors pinned at their nominals.

Wait-and-see and expected-value benchmarks (:func:`wait_and_see_value`,
:func:`expected_value_scenario`, :func:`evaluate_design`) provide the
classic EVPI / VSS orderings for validation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import (
    BuildingConfig,
    CommunityConfig,
    DeviceKind,
    DeviceSpec,
    Scenario,
    align_scenarios,
    scenario_channels,
    scenario_length,
    validate_config,
)
from .devices import (
    BuildingEnergyRefs,
    DesignRefs,
    DeviceBlockRefs,
    emit_battery,
    emit_boiler,
    emit_building_balances,
    emit_community_balance,
    emit_design,
    emit_heat_pump,
    emit_hydrogen_design,
    emit_hydrogen_chain,
    emit_pv,
    emit_roof_coupling,
    emit_stc,
    emit_tes,
)
from .milp import LinExpr, Model, Sense, SolveResult, Status, VarRef, evaluate
from .network import (
    GridBlockRefs,
    create_grid_refs,
    emit_grid_limits,
    emit_lv_aggregation,
    emit_lv_aggregation_distributed,
)
from .objective import (
    ObjectiveBreakdown,
    annuity_factor,
    assemble_two_stage_objective,
    emit_carbon_cost,
    emit_investment_cost,
    emit_operational_cost,
    emit_slack_cost,
)
from .scenarios import compose_factor_scenarios
from .solvers import SolveOptions, SolverError, solve

__all__ = [
    "DesignDecision",
    "PlanResult",
    "CoordinationState",
    "BuiltModel",
    "build_centralized",
    "solve_centralized",
    "initialize_coordination",
    "solve_distributed",
    "run_sensitivity",
    "SensitivityReport",
    "wait_and_see_value",
    "expected_value_scenario",
    "evaluate_design",
]

COMMUNITY_ENTITY = "COM"
_HYDROGEN_KINDS = (DeviceKind.EL, DeviceKind.HYD, DeviceKind.FC)


@dataclass(frozen=True)
class DesignDecision:
    chi: int
    value: float


@dataclass(frozen=True)
class BuildingTraces:
    indoor_celsius: tuple[float, ...]
    heat: tuple[float, ...]
    e_in: tuple[float, ...]
    e_out: tuple[float, ...]
    gas: tuple[float, ...]


@dataclass(frozen=True)
class ScenarioOperations:
    probability: float
    hv_import: tuple[float, ...]
    mv_to_lv: tuple[float, ...]
    lv_to_mv: tuple[float, ...]
    slack_mv: float
    slack_lv: Mapping[int, float]
    buildings: Mapping[int, BuildingTraces]

    def __post_init__(self) -> None:
        object.__setattr__(self, "slack_lv", dict(self.slack_lv))
        object.__setattr__(self, "buildings", dict(self.buildings))


@dataclass(frozen=True)
class PlanResult:
    designs: Mapping[tuple[str, str], DesignDecision]
    breakdown: ObjectiveBreakdown
    operations: Mapping[str, ScenarioOperations]
    solve_meta: Mapping[str, object]

    def __post_init__(self) -> None:
        object.__setattr__(self, "designs", dict(self.designs))
        object.__setattr__(self, "operations", dict(self.operations))
        object.__setattr__(self, "solve_meta", dict(self.solve_meta))

    @property
    def objective(self) -> float:
        return self.breakdown.o_tot


# -- shared emission helpers -------------------------------------------------


def _building_entity(bid: int) -> str:
    return f"b{bid}"


def _effective_spec(spec: DeviceSpec, building: BuildingConfig) -> DeviceSpec:
    """Roof-constrained design bounds for area-based devices."""
    if spec.kind in (DeviceKind.PV, DeviceKind.STC):
        return DeviceSpec(
            kind=spec.kind,
            cap_min=min(spec.cap_min, building.roof_area),
            cap_max=min(spec.cap_max, building.roof_area),
            eta_ch=spec.eta_ch,
            eta_dch=spec.eta_dch,
            sigma=spec.sigma,
            gamma_ch=spec.gamma_ch,
            gamma_dch=spec.gamma_dch,
            size_price=spec.size_price,
            base_price=spec.base_price,
            lifetime_years=spec.lifetime_years,
            extra=spec.extra,
        )
    return spec


def _emit_building_designs(
    model: Model, building: BuildingConfig
) -> dict[DeviceKind, DesignRefs]:
    refs: dict[DeviceKind, DesignRefs] = {}
    entity = _building_entity(building.id)
    for spec in building.devices:
        refs[spec.kind] = emit_design(model, _effective_spec(spec, building), entity)
    pv = refs.get(DeviceKind.PV)
    stc = refs.get(DeviceKind.STC)
    if pv is not None or stc is not None:
        emit_roof_coupling(
            model,
            DeviceBlockRefs(kind=DeviceKind.PV, design=pv, flows={}) if pv else None,
            DeviceBlockRefs(kind=DeviceKind.STC, design=stc, flows={}) if stc else None,
            building.roof_area,
            tag=entity,
        )
    return refs


def _emit_community_designs(
    model: Model, cfg: CommunityConfig
) -> dict[DeviceKind, DesignRefs]:
    refs: dict[DeviceKind, DesignRefs] = {}
    hydrogen = {s.kind: s for s in cfg.community_devices if s.kind in _HYDROGEN_KINDS}
    for spec in cfg.community_devices:
        if spec.kind in _HYDROGEN_KINDS:
            continue
        refs[spec.kind] = emit_design(model, spec, COMMUNITY_ENTITY)
    if hydrogen:
        refs[DeviceKind.HYD] = emit_hydrogen_design(model, hydrogen, COMMUNITY_ENTITY)
    return refs


@dataclass
class _BuildingScenarioRefs:
    thermal: object
    blocks: dict[DeviceKind, DeviceBlockRefs]
    flows: BuildingEnergyRefs
    gas: tuple[VarRef, ...]


def _emit_building_scenario(
    model: Model,
    cfg: CommunityConfig,
    building: BuildingConfig,
    scenario: Scenario,
    designs: Mapping[DeviceKind, DesignRefs],
    horizon: int,
    tag: str,
) -> _BuildingScenarioRefs:
    from .thermal import emit_comfort_constraints, emit_thermal_constraints

    occupant = scenario.occupant[building.id]
    thermal = emit_thermal_constraints(
        model,
        building,
        scenario.climate,
        horizon,
        t_init=float(occupant.t_set.values[0]),
        step_hours=cfg.step_hours,
        tag=tag,
    )
    emit_comfort_constraints(
        model, thermal, occupant.t_set, building.comfort_buffer, tag=tag
    )
    blocks: dict[DeviceKind, DeviceBlockRefs] = {}
    for spec in building.devices:
        design = designs[spec.kind]
        if spec.kind == DeviceKind.BAT:
            blocks[spec.kind] = emit_battery(
                model, spec, horizon, cfg.step_hours, tag, design
            )
        elif spec.kind == DeviceKind.TES:
            blocks[spec.kind] = emit_tes(
                model, spec, horizon, cfg.step_hours, tag, design
            )
        elif spec.kind == DeviceKind.BOL:
            blocks[spec.kind] = emit_boiler(model, spec, horizon, tag, design)
        elif spec.kind == DeviceKind.HP:
            blocks[spec.kind] = emit_heat_pump(
                model, spec, scenario.climate.t_amb, horizon, tag, design
            )
        elif spec.kind == DeviceKind.PV:
            blocks[spec.kind] = emit_pv(
                model, spec, scenario.climate.i_sol, building.roof_area, horizon, tag, design
            )
        elif spec.kind == DeviceKind.STC:
            blocks[spec.kind] = emit_stc(
                model,
                spec,
                scenario.climate.i_sol,
                scenario.climate.t_amb,
                building.roof_area,
                horizon,
                tag,
                design,
            )
        else:
            raise ValueError(f"device kind {spec.kind} is not a building device")
    flows = emit_building_balances(
        model, blocks, thermal.q_sp, occupant.e_base, horizon, tag
    )
    boiler = blocks.get(DeviceKind.BOL)
    gas = boiler.flows["gas"] if boiler is not None else ()
    return _BuildingScenarioRefs(thermal=thermal, blocks=blocks, flows=flows, gas=gas)


@dataclass
class _CommunityScenarioRefs:
    blocks: dict[DeviceKind, DeviceBlockRefs]
    grid: GridBlockRefs
    hv: tuple[VarRef, ...]


def _emit_community_scenario(
    model: Model,
    cfg: CommunityConfig,
    scenario: Scenario,
    designs: Mapping[DeviceKind, DesignRefs],
    horizon: int,
    tag: str,
    slack_building_ids: Sequence[int],
) -> _CommunityScenarioRefs:
    blocks: dict[DeviceKind, DeviceBlockRefs] = {}
    hydrogen = {s.kind: s for s in cfg.community_devices if s.kind in _HYDROGEN_KINDS}
    for spec in cfg.community_devices:
        if spec.kind == DeviceKind.BAT_COM:
            blocks[spec.kind] = emit_battery(
                model, spec, horizon, cfg.step_hours, tag, designs[spec.kind]
            )
        elif spec.kind == DeviceKind.PV_COM:
            blocks[spec.kind] = emit_pv(
                model, spec, scenario.climate.i_sol, spec.cap_max, horizon, tag,
                designs[spec.kind],
            )
        elif spec.kind in _HYDROGEN_KINDS:
            continue
        else:
            raise ValueError(f"device kind {spec.kind} is not a community device")
    if hydrogen:
        blocks[DeviceKind.HYD] = emit_hydrogen_chain(
            model, hydrogen, horizon, cfg.step_hours, tag, designs[DeviceKind.HYD]
        )
    grid = create_grid_refs(model, slack_building_ids, horizon, tag)
    hv, _ = emit_community_balance(
        model, blocks, grid.mv_to_lv, grid.lv_to_mv, horizon, tag
    )
    return _CommunityScenarioRefs(blocks=blocks, grid=grid, hv=hv)


def _scenario_cost_terms(
    model: Model,
    scenario: Scenario,
    hv: Sequence[VarRef],
    gas_by_building: Mapping[int, Sequence[VarRef]],
    grid: GridBlockRefs,
    cfg: CommunityConfig,
    horizon: int,
) -> dict[str, LinExpr]:
    p_el = scenario.economic.p_el.values[:horizon]
    p_gas = scenario.economic.p_gas.values[:horizon]
    p_co2 = scenario.economic.p_co2.values[:horizon]
    return {
        "o_opr": emit_operational_cost(
            model, hv, gas_by_building, p_el, p_gas, cfg.step_hours
        ),
        "o_co2": emit_carbon_cost(model, gas_by_building, p_co2, cfg.step_hours),
        "o_slk": emit_slack_cost(model, grid, cfg.slack_price),
    }


# -- centralized --------------------------------------------------------------


@dataclass
class BuiltModel:
    """A centralized model plus the handles needed to read results back."""

    model: Model
    cfg: CommunityConfig
    scenarios: list[Scenario]
    horizon: int
    building_designs: dict[int, dict[DeviceKind, DesignRefs]]
    community_designs: dict[DeviceKind, DesignRefs]
    inv_expr: LinExpr
    scenario_terms: dict[str, dict[str, LinExpr]]
    building_refs: dict[str, dict[int, _BuildingScenarioRefs]]
    community_refs: dict[str, _CommunityScenarioRefs]

    def probs(self) -> dict[str, float]:
        return {s.id: s.probability for s in self.scenarios}

    def design_entries(self) -> dict[tuple[str, str], tuple[DeviceSpec, VarRef, VarRef]]:
        out: dict[tuple[str, str], tuple[DeviceSpec, VarRef, VarRef]] = {}
        for bid, designs in self.building_designs.items():
            for refs in designs.values():
                for spec, var in refs.entries:
                    out[(_building_entity(bid), spec.kind.value)] = (spec, var, refs.chi)
        for refs in self.community_designs.values():
            for spec, var in refs.entries:
                out[(COMMUNITY_ENTITY, spec.kind.value)] = (spec, var, refs.chi)
        return out

    def extract(self, result: SolveResult) -> PlanResult:
        values = result.values
        designs = {
            key: DesignDecision(
                chi=int(round(values[chi.name])), value=values[var.name]
            )
            for key, (spec, var, chi) in self.design_entries().items()
        }
        per_scenario: dict[str, dict[str, float]] = {}
        for sid, terms in self.scenario_terms.items():
            per_scenario[sid] = {
                name: evaluate(expr, self.model, values) for name, expr in terms.items()
            }
        breakdown = ObjectiveBreakdown.from_terms(
            evaluate(self.inv_expr, self.model, values), per_scenario, self.probs()
        )
        operations: dict[str, ScenarioOperations] = {}
        probs = self.probs()
        for sid in self.scenario_terms:
            com = self.community_refs[sid]
            buildings = {}
            for bid, refs in self.building_refs[sid].items():
                buildings[bid] = BuildingTraces(
                    indoor_celsius=tuple(refs.thermal.indoor_celsius(values)),
                    heat=tuple(values[v.name] for v in refs.thermal.q_sp),
                    e_in=tuple(values[v.name] for v in refs.flows.e_in),
                    e_out=tuple(values[v.name] for v in refs.flows.e_out),
                    gas=tuple(values[v.name] for v in refs.gas)
                    or (0.0,) * self.horizon,
                )
            operations[sid] = ScenarioOperations(
                probability=probs[sid],
                hv_import=tuple(values[v.name] for v in com.hv),
                mv_to_lv=tuple(values[v.name] for v in com.grid.mv_to_lv),
                lv_to_mv=tuple(values[v.name] for v in com.grid.lv_to_mv),
                slack_mv=values[com.grid.s_mv.name],
                slack_lv={
                    bid: values[var.name] for bid, var in com.grid.s_lv.items()
                },
                buildings=buildings,
            )
        meta = dict(result.solver_meta)
        meta.update(self.model.stats())
        meta["status"] = result.status.value
        meta["solver_objective"] = result.objective
        return PlanResult(
            designs=designs,
            breakdown=breakdown,
            operations=operations,
            solve_meta=meta,
        )


def build_centralized(
    cfg: CommunityConfig, scenarios: Sequence[Scenario], name: str = "community"
) -> BuiltModel:
    """One model: shared first-stage designs, per-scenario second stage."""
    violations = validate_config(cfg)
    if violations:
        raise ValueError("invalid configuration:\n" + "\n".join(violations))
    scenarios = align_scenarios(list(scenarios))
    horizon = min(cfg.horizon_steps, scenario_length(scenarios[0]))
    model = Model(name)
    building_designs = {
        b.id: _emit_building_designs(model, b) for b in cfg.buildings
    }
    community_designs = _emit_community_designs(model, cfg)

    all_design_blocks: list[DeviceBlockRefs] = []
    for bid, designs in building_designs.items():
        for kind, refs in designs.items():
            all_design_blocks.append(DeviceBlockRefs(kind=kind, design=refs, flows={}))
    for kind, refs in community_designs.items():
        all_design_blocks.append(DeviceBlockRefs(kind=kind, design=refs, flows={}))
    inv_expr = emit_investment_cost(model, all_design_blocks, cfg.discount_rate)

    scenario_terms: dict[str, dict[str, LinExpr]] = {}
    building_refs: dict[str, dict[int, _BuildingScenarioRefs]] = {}
    community_refs: dict[str, _CommunityScenarioRefs] = {}
    for w, scenario in enumerate(scenarios):
        stag = f"s{w}"
        per_building: dict[int, _BuildingScenarioRefs] = {}
        for building in cfg.buildings:
            tag = f"{_building_entity(building.id)}_{stag}"
            per_building[building.id] = _emit_building_scenario(
                model, cfg, building, scenario, building_designs[building.id],
                horizon, tag,
            )
        com = _emit_community_scenario(
            model, cfg, scenario, community_designs, horizon, f"COM_{stag}",
            [b.id for b in cfg.buildings],
        )
        emit_grid_limits(
            model,
            com.grid,
            {bid: refs.flows for bid, refs in per_building.items()},
            cfg.lv_limit,
            cfg.mv_limit,
            f"COM_{stag}",
        )
        emit_lv_aggregation(
            model,
            {bid: refs.flows for bid, refs in per_building.items()},
            com.grid,
            f"COM_{stag}",
        )
        scenario_terms[scenario.id] = _scenario_cost_terms(
            model,
            scenario,
            com.hv,
            {bid: refs.gas for bid, refs in per_building.items()},
            com.grid,
            cfg,
            horizon,
        )
        building_refs[scenario.id] = per_building
        community_refs[scenario.id] = com

    objective = assemble_two_stage_objective(
        inv_expr,
        {sid: terms["o_opr"] + terms["o_co2"] + terms["o_slk"]
         for sid, terms in scenario_terms.items()},
        {s.id: s.probability for s in scenarios},
    )
    model.minimize(objective)
    return BuiltModel(
        model=model,
        cfg=cfg,
        scenarios=scenarios,
        horizon=horizon,
        building_designs=building_designs,
        community_designs=community_designs,
        inv_expr=inv_expr,
        scenario_terms=scenario_terms,
        building_refs=building_refs,
        community_refs=community_refs,
    )


def solve_centralized(
    cfg: CommunityConfig,
    scenarios: Sequence[Scenario],
    backend: object = "scipy",
    options: SolveOptions | None = None,
) -> PlanResult:
    built = build_centralized(cfg, scenarios)
    t0 = time.perf_counter()
    result = solve(built.model, backend, options)
    if result.status not in (Status.OPTIMAL, Status.LIMIT):
        raise SolverError(f"centralized solve ended {result.status.value}")
    plan = built.extract(result)
    plan.solve_meta["iterations"] = 1
    plan.solve_meta["wall_time_s"] = time.perf_counter() - t0
    return plan


# -- distributed ---------------------------------------------------------------


@dataclass
class CoordinationState:
    """Exchange state of the sequential scheme.

    ``others_net[bid][sid][t]`` is the fixed net consumption (import
    minus export) of every building except ``bid``; updated after each
    sub-solve from the solving building's fresh flows.
    """

    others_net: dict[int, dict[str, np.ndarray]]
    o_tot_history: list[float] = field(default_factory=list)
    epsilon: float = 1.0

    def as_dict(self) -> dict:
        return {
            "others_net": {
                str(bid): {sid: list(map(float, arr)) for sid, arr in per.items()}
                for bid, per in self.others_net.items()
            },
            "o_tot_history": list(self.o_tot_history),
            "epsilon": self.epsilon,
        }

    @staticmethod
    def from_dict(data: Mapping) -> "CoordinationState":
        return CoordinationState(
            others_net={
                int(bid): {sid: np.asarray(arr, float) for sid, arr in per.items()}
                for bid, per in data["others_net"].items()
            },
            o_tot_history=list(data["o_tot_history"]),
            epsilon=float(data["epsilon"]),
        )


def initialize_coordination(
    cfg: CommunityConfig, scenarios: Sequence[Scenario], epsilon: float = 1.0
) -> CoordinationState:
    """All neighbours start silent: zero net flows everywhere."""
    horizon = min(cfg.horizon_steps, min(scenario_length(s) for s in scenarios))
    return CoordinationState(
        others_net={
            b.id: {s.id: np.zeros(horizon) for s in scenarios} for b in cfg.buildings
        },
        o_tot_history=[],
        epsilon=epsilon,
    )


@dataclass
class _SubSolution:
    designs: dict[tuple[str, str], DesignDecision]
    net: dict[str, np.ndarray]  # per scenario: e_in - e_out
    traces: dict[str, BuildingTraces]
    gas_cost: dict[str, float]  # per scenario, opr gas EUR
    co2_cost: dict[str, float]
    slack_lv: dict[str, float]
    inv_cost: float


def _investment_value(entries, designs: Mapping[tuple[str, str], DesignDecision],
                      entity: str, r: float) -> float:
    total = 0.0
    for spec, _ in entries:
        decision = designs[(entity, spec.kind.value)]
        factor = annuity_factor(r, spec.lifetime_years)
        total += (spec.size_price * decision.value + spec.base_price * decision.chi) * factor
    return total


def solve_distributed(
    cfg: CommunityConfig,
    scenarios: Sequence[Scenario],
    epsilon: float = 1.0,
    max_iters: int = 50,
    backend: object = "scipy",
    options: SolveOptions | None = None,
) -> PlanResult:
    """Sequential building-by-building coordination.

    Every sub-problem owns one building's blocks plus all community
    utilities and grid terms; the remaining buildings enter through the
    coupling balance as the fixed ``others_net`` parameter.  Sweeps
    repeat in ascending building id order until the global objective
    changes by at most ``epsilon`` or ``max_iters`` is hit, in which
    case the best iterate is returned flagged unconverged.
    """
    violations = validate_config(cfg)
    if violations:
        raise ValueError("invalid configuration:\n" + "\n".join(violations))
    scenarios = align_scenarios(list(scenarios))
    horizon = min(cfg.horizon_steps, scenario_length(scenarios[0]))
    state = initialize_coordination(cfg, scenarios, epsilon)
    probs = {s.id: s.probability for s in scenarios}
    t0 = time.perf_counter()

    building_solutions: dict[int, _SubSolution] = {}
    community_piece: dict[str, object] = {}
    converged = False
    sweeps = 0

    for sweep in range(1, max_iters + 1):
        sweeps = sweep
        for building in sorted(cfg.buildings, key=lambda b: b.id):
            sub = _solve_subproblem(
                cfg, building, scenarios, state, horizon, backend, options
            )
            building_solutions[building.id] = sub["building"]
            community_piece = sub["community"]
            # refresh every other building's view of the world
            for other in cfg.buildings:
                if other.id == building.id:
                    continue
                for sid in probs:
                    state.others_net[other.id][sid] = _sum_others_net(
                        building_solutions, other.id, sid, horizon
                    )
        o_tot, breakdown = _merge_objective(
            cfg, scenarios, building_solutions, community_piece, probs
        )
        state.o_tot_history.append(o_tot)
        if len(state.o_tot_history) >= 2 and abs(
            state.o_tot_history[-1] - state.o_tot_history[-2]
        ) <= epsilon:
            converged = True
            break

    designs: dict[tuple[str, str], DesignDecision] = {}
    for sub in building_solutions.values():
        designs.update(sub.designs)
    designs.update(community_piece["designs"])
    operations = {}
    for sid in probs:
        operations[sid] = ScenarioOperations(
            probability=probs[sid],
            hv_import=community_piece["hv"][sid],
            mv_to_lv=community_piece["mv_to_lv"][sid],
            lv_to_mv=community_piece["lv_to_mv"][sid],
            slack_mv=community_piece["slack_mv"][sid],
            slack_lv={
                bid: sub.slack_lv[sid] for bid, sub in building_solutions.items()
            },
            buildings={
                bid: sub.traces[sid] for bid, sub in building_solutions.items()
            },
        )
    meta = {
        "iterations": sweeps,
        "converged": converged,
        "epsilon": epsilon,
        "o_tot_history": list(state.o_tot_history),
        "wall_time_s": time.perf_counter() - t0,
        "backend": getattr(backend, "name", backend),
    }
    return PlanResult(
        designs=designs, breakdown=breakdown, operations=operations, solve_meta=meta
    )


def _sum_others_net(
    building_solutions: Mapping[int, _SubSolution], bid: int, sid: str, horizon: int
) -> np.ndarray:
    total = np.zeros(horizon)
    for other_id, sub in building_solutions.items():
        if other_id != bid and sid in sub.net:
            total += sub.net[sid]
    return total


def _solve_subproblem(
    cfg: CommunityConfig,
    building: BuildingConfig,
    scenarios: Sequence[Scenario],
    state: CoordinationState,
    horizon: int,
    backend: object,
    options: SolveOptions | None,
) -> dict:
    model = Model(f"sub_{_building_entity(building.id)}")
    bdesigns = _emit_building_designs(model, building)
    cdesigns = _emit_community_designs(model, cfg)
    design_blocks = [
        DeviceBlockRefs(kind=kind, design=refs, flows={})
        for kind, refs in list(bdesigns.items()) + list(cdesigns.items())
    ]
    inv_expr = emit_investment_cost(model, design_blocks, cfg.discount_rate)

    terms: dict[str, dict[str, LinExpr]] = {}
    brefs: dict[str, _BuildingScenarioRefs] = {}
    crefs: dict[str, _CommunityScenarioRefs] = {}
    for w, scenario in enumerate(scenarios):
        tag = f"{_building_entity(building.id)}_s{w}"
        bref = _emit_building_scenario(
            model, cfg, building, scenario, bdesigns, horizon, tag
        )
        cref = _emit_community_scenario(
            model, cfg, scenario, cdesigns, horizon, f"COM_s{w}", [building.id]
        )
        emit_grid_limits(
            model, cref.grid, {building.id: bref.flows}, cfg.lv_limit, cfg.mv_limit,
            f"COM_s{w}",
        )
        emit_lv_aggregation_distributed(
            model,
            bref.flows,
            state.others_net[building.id][scenario.id],
            cref.grid,
            f"COM_s{w}",
        )
        terms[scenario.id] = _scenario_cost_terms(
            model, scenario, cref.hv, {building.id: bref.gas}, cref.grid, cfg, horizon
        )
        brefs[scenario.id] = bref
        crefs[scenario.id] = cref

    objective = assemble_two_stage_objective(
        inv_expr,
        {sid: t["o_opr"] + t["o_co2"] + t["o_slk"] for sid, t in terms.items()},
        {s.id: s.probability for s in scenarios},
    )
    model.minimize(objective)
    result = solve(model, backend, options)
    if result.status not in (Status.OPTIMAL, Status.LIMIT):
        raise SolverError(
            f"sub-problem for building {building.id} ended {result.status.value}"
        )
    values = result.values

    entity = _building_entity(building.id)
    bdesign_out: dict[tuple[str, str], DesignDecision] = {}
    for refs in bdesigns.values():
        for spec, var in refs.entries:
            bdesign_out[(entity, spec.kind.value)] = DesignDecision(
                chi=int(round(values[refs.chi.name])), value=values[var.name]
            )
    cdesign_out: dict[tuple[str, str], DesignDecision] = {}
    for refs in cdesigns.values():
        for spec, var in refs.entries:
            cdesign_out[(COMMUNITY_ENTITY, spec.kind.value)] = DesignDecision(
                chi=int(round(values[refs.chi.name])), value=values[var.name]
            )

    net: dict[str, np.ndarray] = {}
    traces: dict[str, BuildingTraces] = {}
    gas_cost: dict[str, float] = {}
    co2_cost: dict[str, float] = {}
    slack_lv: dict[str, float] = {}
    hv_out: dict[str, tuple[float, ...]] = {}
    mvlv_out: dict[str, tuple[float, ...]] = {}
    lvmv_out: dict[str, tuple[float, ...]] = {}
    smv_out: dict[str, float] = {}
    hv_cost: dict[str, float] = {}
    for scenario in scenarios:
        sid = scenario.id
        bref, cref = brefs[sid], crefs[sid]
        e_in = np.array([values[v.name] for v in bref.flows.e_in])
        e_out = np.array([values[v.name] for v in bref.flows.e_out])
        net[sid] = e_in - e_out
        gas = np.array([values[v.name] for v in bref.gas]) if bref.gas else np.zeros(horizon)
        traces[sid] = BuildingTraces(
            indoor_celsius=tuple(bref.thermal.indoor_celsius(values)),
            heat=tuple(values[v.name] for v in bref.thermal.q_sp),
            e_in=tuple(e_in),
            e_out=tuple(e_out),
            gas=tuple(gas),
        )
        p_gas = scenario.economic.p_gas.values[:horizon]
        p_co2 = scenario.economic.p_co2.values[:horizon]
        p_el = scenario.economic.p_el.values[:horizon]
        gas_cost[sid] = float(np.dot(gas, p_gas) * cfg.step_hours)
        co2_cost[sid] = float(np.dot(gas, p_co2) * cfg.step_hours)
        slack_lv[sid] = values[cref.grid.s_lv[building.id].name]
        hv = np.array([values[v.name] for v in cref.hv])
        hv_out[sid] = tuple(hv)
        mvlv_out[sid] = tuple(values[v.name] for v in cref.grid.mv_to_lv)
        lvmv_out[sid] = tuple(values[v.name] for v in cref.grid.lv_to_mv)
        smv_out[sid] = values[cref.grid.s_mv.name]
        hv_cost[sid] = float(np.dot(hv, p_el) * cfg.step_hours)

    return {
        "building": _SubSolution(
            designs=bdesign_out,
            net=net,
            traces=traces,
            gas_cost=gas_cost,
            co2_cost=co2_cost,
            slack_lv=slack_lv,
            inv_cost=_investment_value(
                [(s, v) for refs in bdesigns.values() for s, v in refs.entries],
                bdesign_out, entity, cfg.discount_rate,
            ),
        ),
        "community": {
            "designs": cdesign_out,
            "hv": hv_out,
            "mv_to_lv": mvlv_out,
            "lv_to_mv": lvmv_out,
            "slack_mv": smv_out,
            "hv_cost": hv_cost,
            "inv_cost": _investment_value(
                [(s, v) for refs in cdesigns.values() for s, v in refs.entries],
                cdesign_out, COMMUNITY_ENTITY, cfg.discount_rate,
            ),
        },
    }


def _merge_objective(
    cfg: CommunityConfig,
    scenarios: Sequence[Scenario],
    building_solutions: Mapping[int, _SubSolution],
    community_piece: Mapping[str, object],
    probs: Mapping[str, float],
) -> tuple[float, ObjectiveBreakdown]:
    o_inv = community_piece["inv_cost"] + sum(
        sub.inv_cost for sub in building_solutions.values()
    )
    per_scenario: dict[str, dict[str, float]] = {}
    for sid in probs:
        o_opr = community_piece["hv_cost"][sid] + sum(
            sub.gas_cost[sid] for sub in building_solutions.values()
        )
        o_co2 = sum(sub.co2_cost[sid] for sub in building_solutions.values())
        o_slk = cfg.slack_price * (
            community_piece["slack_mv"][sid]
            + sum(sub.slack_lv[sid] for sub in building_solutions.values())
        )
        per_scenario[sid] = {"o_opr": o_opr, "o_co2": o_co2, "o_slk": o_slk}
    breakdown = ObjectiveBreakdown.from_terms(o_inv, per_scenario, dict(probs))
    return breakdown.o_tot, breakdown


# -- sensitivity and stochastic benchmarks ------------------------------------


@dataclass(frozen=True)
class DesignSpread:
    minimum: float
    maximum: float
    mean: float
    std: float
    values: Mapping[str, float]  # per singleton scenario id

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", dict(self.values))


@dataclass(frozen=True)
class SensitivityReport:
    spreads: Mapping[str, Mapping[tuple[str, str], DesignSpread]]  # factor -> device
    reference: Mapping[tuple[str, str], DesignDecision]
    nominal_ids: Mapping[str, Mapping[str, str]]
    infeasible: tuple[tuple[str, str], ...]  # (factor, scenario id)

    def __post_init__(self) -> None:
        object.__setattr__(self, "spreads", {f: dict(v) for f, v in self.spreads.items()})
        object.__setattr__(self, "reference", dict(self.reference))
        object.__setattr__(self, "nominal_ids", {f: dict(v) for f, v in self.nominal_ids.items()})


def run_sensitivity(
    cfg: CommunityConfig,
    occ: Sequence[Scenario],
    eco: Sequence[Scenario],
    clim: Sequence[Scenario],
    backend: object = "scipy",
    options: SolveOptions | None = None,
    reference_scenarios: Sequence[Scenario] | None = None,
    factors: Sequence[str] = ("occ", "eco", "clim"),
) -> SensitivityReport:
    """One-at-a-time design sensitivity per uncertainty factor.

    Solves one deterministic problem per factor member (other factors
    pinned at their nominals), reports per-device design spread, and
    includes the stochastic optimum over ``reference_scenarios``
    (default: the occupant set, which usually is the joint ensemble).
    ``factors`` restricts which families are run.
    """
    problems = [
        p
        for p in compose_factor_scenarios(occ, eco, clim, mode="one_at_a_time")
        if p.factor in factors
    ]
    reference_pool = list(reference_scenarios if reference_scenarios is not None else occ)
    reference = solve_centralized(cfg, reference_pool, backend, options)

    spreads: dict[str, dict[tuple[str, str], DesignSpread]] = {}
    infeasible: list[tuple[str, str]] = []
    nominal_ids = {}
    for problem in problems:
        per_device: dict[tuple[str, str], dict[str, float]] = {}
        nominal_ids[problem.factor] = dict(problem.nominal_ids)
        for singleton in problem.scenarios:
            try:
                plan = solve_centralized(cfg, [singleton], backend, options)
            except (SolverError, ValueError):
                infeasible.append((problem.factor, singleton.id))
                continue
            for key, decision in plan.designs.items():
                per_device.setdefault(key, {})[singleton.id] = decision.value
        spreads[problem.factor] = {
            key: DesignSpread(
                minimum=float(np.min(list(vals.values()))),
                maximum=float(np.max(list(vals.values()))),
                mean=float(np.mean(list(vals.values()))),
                std=float(np.std(list(vals.values()))),
                values=vals,
            )
            for key, vals in per_device.items()
        }
    return SensitivityReport(
        spreads=spreads,
        reference=reference.designs,
        nominal_ids=nominal_ids,
        infeasible=tuple(infeasible),
    )


def wait_and_see_value(
    cfg: CommunityConfig,
    scenarios: Sequence[Scenario],
    backend: object = "scipy",
    options: SolveOptions | None = None,
) -> float:
    """Probability-weighted perfect-information optimum."""
    scenarios = align_scenarios(list(scenarios))
    total = 0.0
    for scenario in scenarios:
        singleton = Scenario(
            id=scenario.id, probability=1.0, occupant=scenario.occupant,
            economic=scenario.economic, climate=scenario.climate,
        )
        plan = solve_centralized(cfg, [singleton], backend, options)
        total += scenario.probability * plan.objective
    return total


def expected_value_scenario(scenarios: Sequence[Scenario]) -> Scenario:
    """Probability-weighted mean of every channel, as one scenario."""
    from .scenarios import channels_to_scenario

    scenarios = align_scenarios(list(scenarios))
    first = scenario_channels(scenarios[0])
    mixed = {name: np.zeros(len(series)) for name, series in first.items()}
    for scenario in scenarios:
        for name, series in scenario_channels(scenario).items():
            mixed[name] += scenario.probability * np.asarray(series.values)
    start = scenarios[0].climate.t_amb.start
    step = scenarios[0].climate.t_amb.step_hours
    return channels_to_scenario("expected_value", 1.0, mixed, start, step)


def evaluate_design(
    cfg: CommunityConfig,
    scenarios: Sequence[Scenario],
    designs: Mapping[tuple[str, str], DesignDecision],
    backend: object = "scipy",
    options: SolveOptions | None = None,
) -> PlanResult:
    """Second-stage evaluation of a fixed first-stage design."""
    built = build_centralized(cfg, scenarios, name="evaluation")
    for key, (spec, var, chi) in built.design_entries().items():
        decision = designs[key]
        built.model.add_constraint(
            LinExpr({chi.id: 1.0}, 0.0, built.model._model_id),
            Sense.EQ,
            float(decision.chi),
            f"fix_chi_{key[0]}_{key[1]}",
        )
        built.model.add_constraint(
            LinExpr({var.id: 1.0}, 0.0, built.model._model_id),
            Sense.EQ,
            decision.value,
            f"fix_val_{key[0]}_{key[1]}",
        )
    result = solve(built.model, backend, options)
    if result.status not in (Status.OPTIMAL, Status.LIMIT):
        raise SolverError(f"design evaluation ended {result.status.value}")
    return built.extract(result)
