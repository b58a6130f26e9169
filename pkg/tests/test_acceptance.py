"""Acceptance suite: every exit criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one
``ACCEPTANCE nn PASS/FAIL`` line per criterion.
"""

import functools
import hashlib
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from communityplan.core import DeviceKind, DeviceSpec, Scenario, scenario_channels
from communityplan.devices import simulate_storage
from communityplan.io import emit_reports, make_run_manifest, save_scenarios
from communityplan.lpformat import export_lp
from communityplan.milp import LinExpr, Model, Sense, Status
from communityplan.objective import annuity_factor
from communityplan.planner import (
    build_centralized,
    evaluate_design,
    expected_value_scenario,
    run_sensitivity,
    solve_centralized,
    solve_distributed,
    wait_and_see_value,
)
from communityplan.scenarios import (
    BootstrapSpec,
    bootstrap_years,
    compose_factor_scenarios,
    kmedoids,
    reduce_scenarios,
)
from communityplan.solvers import solve
from communityplan.thermal import emit_thermal_constraints

from conftest import (
    battery_spec,
    boiler_spec,
    simple_building,
    simple_config,
    simple_scenario,
)
from oracles import (
    annuity_reference,
    brute_force_kmedoids,
    euler_rc_trajectories,
    rc_steady_state_order5,
    storage_replay,
)
from test_scenarios import make_history
from test_thermal import RC_BY_ORDER, building_of_order, climate


def criterion(num: int, description: str):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"\nACCEPTANCE {num:02d} FAIL {description}")
                raise
            print(f"\nACCEPTANCE {num:02d} PASS {description}")

        return wrapper

    return decorate


def objective_integrity(plan):
    """Criterion 8 side condition, asserted on every solved instance."""
    solver_obj = plan.solve_meta.get("solver_objective")
    if solver_obj is not None:
        scale = max(1.0, abs(solver_obj))
        assert abs(plan.breakdown.o_tot - solver_obj) / scale <= 1e-6
    assert plan.breakdown.identity_gap() <= 1e-9


def five_building_instance(interactive: bool):
    """5 buildings, 10 scenarios, 168 hours, as the criterion mandates.

    ``interactive`` adds exporter PV roofs, building batteries, a shared
    community battery and price spread; the plain variant keeps flat
    prices and boilers only, where no inter-building exchange pays.
    """
    horizon = 168
    rng = np.random.default_rng(0)
    buildings = []
    for i in range(1, 6):
        devices = [boiler_spec()]
        if interactive:
            devices.append(battery_spec(cap_max=8.0, size_price=20.0, base_price=50.0))
            if i <= 2:
                devices.append(
                    DeviceSpec(kind="PV", cap_min=20.0, cap_max=20.0,
                               size_price=0.0, base_price=0.0,
                               lifetime_years=25.0, extra={"eta": 0.2})
                )
        buildings.append(simple_building(i, devices=tuple(devices), roof_area=30.0))
    community = ()
    if interactive:
        community = (
            DeviceSpec(kind="BAT_COM", cap_min=1.0, cap_max=80.0, eta_ch=0.95,
                       eta_dch=0.95, sigma=0.999, gamma_ch=1.0, gamma_dch=1.0,
                       size_price=5.0, base_price=10.0, lifetime_years=20.0),
        )
    cfg = simple_config(buildings, horizon=horizon, community_devices=community,
                        mv_limit=150.0)
    scenarios = []
    for i in range(10):
        scenarios.append(
            simple_scenario(
                f"s{i}", 0.1, horizon=horizon, building_ids=tuple(range(1, 6)),
                t_amb_level=float(rng.uniform(0.0, 9.0)),
                el_price=float(rng.uniform(0.15, 0.45)) if interactive else 0.25,
                gas_price=float(rng.uniform(0.09, 0.14)) if interactive else 0.11,
                sol_peak=float(rng.uniform(150.0, 450.0)) if interactive else 0.0,
            )
        )
    return cfg, scenarios


@criterion(1, "distributed matches centralized (1% / exact when uncoupled, <5 min)")
def test_criterion_1_distributed_equals_centralized():
    t0 = time.perf_counter()

    cfg, scenarios = five_building_instance(interactive=True)
    central = solve_centralized(cfg, scenarios)
    objective_integrity(central)
    distributed = solve_distributed(cfg, scenarios, epsilon=1.0, max_iters=8)
    gap = abs(distributed.objective - central.objective) / abs(central.objective)
    assert gap <= 0.01

    cfg_flat, scenarios_flat = five_building_instance(interactive=False)
    central_flat = solve_centralized(cfg_flat, scenarios_flat)
    objective_integrity(central_flat)
    distributed_flat = solve_distributed(cfg_flat, scenarios_flat, epsilon=1.0,
                                         max_iters=8)
    assert distributed_flat.solve_meta["converged"]
    assert distributed_flat.solve_meta["iterations"] == 2  # first sweep decides
    exact_gap = abs(distributed_flat.objective - central_flat.objective) / abs(
        central_flat.objective
    )
    assert exact_gap <= 1e-6

    elapsed = time.perf_counter() - t0
    assert elapsed < 300.0, f"runtime target missed: {elapsed:.0f}s"


@criterion(2, "annuity factor exact at (0.05, 1) and 1e-12 against references")
def test_criterion_2_annuity():
    assert annuity_factor(0.05, 1) == 1.05
    rng = np.random.default_rng(202)
    for _ in range(100):
        r = float(rng.uniform(0.003, 0.3))
        tau = float(rng.integers(1, 41))
        reference = annuity_reference(r, tau)
        assert abs(annuity_factor(r, tau) - reference) <= 1e-12 * max(
            1.0, abs(reference)
        )


@criterion(3, "RC trajectories match forward Euler (1e-8); order-5 steady state (1e-6)")
def test_criterion_3_rc_oracle():
    for order in (1, 2, 3, 4, 5):
        horizon = 72
        clim = climate(horizon)
        rng = np.random.default_rng(30 + order)
        q_fixed = rng.uniform(0.0, 2.5, horizon)
        model = Model(f"rc{order}")
        refs = emit_thermal_constraints(
            model, building_of_order(order), clim, horizon, t_init=19.0
        )
        for t, var in enumerate(refs.q_sp):
            model.add_constraint(
                LinExpr({var.id: 1.0}, 0.0, var.model_id), Sense.EQ,
                q_fixed[t], f"pin{t}",
            )
        model.minimize(LinExpr())
        result = solve(model)
        assert result.status == Status.OPTIMAL
        rc = RC_BY_ORDER[order]
        oracle = euler_rc_trajectories(
            order, dict(rc.resistances), dict(rc.capacities), rc.window_area,
            rc.envelope_area, clim.t_amb.values, clim.i_sol.values, q_fixed, 19.0,
        )
        got = refs.indoor_celsius(result.values)
        assert np.max(np.abs(got - oracle["i"])) <= 1e-8

    # constant-input steady state of the full model, through the solver
    horizon = 2600
    t_amb, i_sol, q = 5.0, 150.0, 1.2
    clim = climate(horizon, t_amb=np.full(horizon, t_amb),
                   i_sol=np.full(horizon, i_sol))
    model = Model("rc5ss")
    refs = emit_thermal_constraints(
        model, building_of_order(5), clim, horizon, t_init=19.0
    )
    for t, var in enumerate(refs.q_sp):
        model.add_constraint(
            LinExpr({var.id: 1.0}, 0.0, var.model_id), Sense.EQ, q, f"pin{t}"
        )
    model.minimize(LinExpr())
    result = solve(model)
    assert result.status == Status.OPTIMAL
    rc = RC_BY_ORDER[5]
    steady = rc_steady_state_order5(
        dict(rc.resistances), dict(rc.capacities), rc.window_area,
        rc.envelope_area, t_amb, i_sol, q,
    )
    for node in "iemhs":
        final = refs.state_celsius(node, result.values)[-1]
        assert final == pytest.approx(steady[node], abs=1e-6)


def storage_exercise_instance():
    """96 h community: cycling building battery and TES, plus a hydrogen
    chain absorbing forced community PV surplus."""
    horizon = 96
    hod = np.arange(horizon) % 24
    building = simple_building(
        1,
        devices=(
            boiler_spec(cap_max=25.0),
            battery_spec(cap_max=10.0, eta=0.95, sigma=0.999, gamma=1.0,
                         size_price=2.0, base_price=5.0),
            DeviceSpec(kind="TES", cap_min=0.5, cap_max=15.0, eta_ch=0.95,
                       eta_dch=0.95, sigma=0.99, gamma_ch=1.0, gamma_dch=1.0,
                       size_price=1.0, base_price=2.0, lifetime_years=20.0),
        ),
    )
    community = (
        DeviceSpec(kind="PV_COM", cap_min=120.0, cap_max=120.0, size_price=0.0,
                   base_price=0.0, lifetime_years=25.0, extra={"eta": 0.2}),
        DeviceSpec(kind="EL", cap_min=0.0, cap_max=200.0, eta_ch=0.7,
                   gamma_ch=1.0, size_price=1.0, base_price=2.0,
                   lifetime_years=15.0),
        DeviceSpec(kind="HYD", cap_min=0.0, cap_max=5000.0, sigma=1.0,
                   size_price=0.1, base_price=1.0, lifetime_years=25.0),
        DeviceSpec(kind="FC", cap_min=0.0, cap_max=200.0, eta_dch=0.5,
                   gamma_dch=1.0, size_price=1.0, base_price=2.0,
                   lifetime_years=10.0),
    )
    cfg = simple_config([building], horizon=horizon, community_devices=community,
                        lv_limit=40.0, mv_limit=150.0)
    base = simple_scenario(horizon=horizon, t_amb_level=3.0, sol_peak=400.0)
    # spiky electricity price rewards cycling; stepped gas price moves TES
    p_el = 0.15 + 0.45 * ((hod >= 18) & (hod <= 21))
    p_gas = 0.08 + 0.08 * ((hod >= 6) & (hod <= 20))
    economic = type(base.economic)(
        type(base.economic.p_el)(base.economic.p_el.start, 1.0, p_el,
                                 base.economic.p_el.unit),
        type(base.economic.p_gas)(base.economic.p_gas.start, 1.0, p_gas,
                                  base.economic.p_gas.unit),
        base.economic.p_co2,
    )
    scenario = Scenario("s0", 1.0, base.occupant, economic, base.climate)
    return cfg, scenario


@criterion(4, "storage replay 1e-8, relaxed cyclic, hydrogen 35% round trip")
def test_criterion_4_storage():
    cfg, scenario = storage_exercise_instance()
    built = build_centralized(cfg, [scenario])
    result = solve(built.model)
    assert result.status == Status.OPTIMAL
    plan = built.extract(result)
    objective_integrity(plan)

    checked = 0
    moved = 0
    for blocks, specs in (
        (built.building_refs["s0"][1].blocks, {s.kind: s for s in cfg.buildings[0].devices}),
        (built.community_refs["s0"].blocks, {s.kind: s for s in cfg.community_devices}),
    ):
        for kind, refs in blocks.items():
            if refs.state is None:
                continue
            states = np.array([result.values[v.name] for v in refs.state])
            charge = np.array([result.values[v.name] for v in refs.flows["charge"]])
            discharge = np.array(
                [result.values[v.name] for v in refs.flows["discharge"]]
            )
            if kind == DeviceKind.HYD:
                eta_ch = specs[DeviceKind.EL].eta_ch
                eta_dch = specs[DeviceKind.FC].eta_dch
                sigma = specs[DeviceKind.HYD].sigma
            else:
                spec = specs[kind]
                eta_ch, eta_dch, sigma = spec.eta_ch, spec.eta_dch, spec.sigma
            replay = storage_replay(states[0], charge, discharge, eta_ch,
                                    eta_dch, sigma)
            assert np.max(np.abs(states - replay)) <= 1e-8
            assert states[0] <= states[-1] + 1e-7  # relaxed cyclic bound
            package_replay = simulate_storage(states[0], charge, discharge,
                                              eta_ch, eta_dch, sigma)
            assert np.max(np.abs(states - package_replay)) <= 1e-8
            checked += 1
            if charge.sum() + discharge.sum() > 0.5:
                moved += 1
    assert checked == 3  # battery, TES, hydrogen tank
    assert moved >= 2  # the instance genuinely cycles its storage

    # device-contract round trip at the stated efficiencies
    from communityplan.devices import emit_hydrogen_chain

    model = Model("h2")
    specs = {
        DeviceKind.EL: DeviceSpec(kind="EL", cap_min=0.0, cap_max=100.0,
                                  eta_ch=0.7, gamma_ch=1.0),
        DeviceKind.HYD: DeviceSpec(kind="HYD", cap_min=0.0, cap_max=1000.0,
                                   sigma=1.0),
        DeviceKind.FC: DeviceSpec(kind="FC", cap_min=0.0, cap_max=100.0,
                                  eta_dch=0.5, gamma_dch=1.0),
    }
    refs = emit_hydrogen_chain(model, specs, horizon=3)
    pins = {
        refs.state[0]: 0.0, refs.flows["charge"][0]: 10.0,
        refs.flows["discharge"][0]: 0.0, refs.flows["charge"][1]: 0.0,
        refs.state[2]: 0.0, refs.flows["charge"][2]: 0.0,
        refs.flows["discharge"][2]: 0.0,
    }
    for var, value in pins.items():
        model.add_constraint(
            LinExpr({var.id: 1.0}, 0.0, var.model_id), Sense.EQ, value,
            f"pin_{var.name}",
        )
    model.minimize(LinExpr())
    result = solve(model)
    assert result.status == Status.OPTIMAL
    recovered = result.values[refs.flows["discharge"][1].name]
    assert abs(recovered / 10.0 - 0.35) <= 1e-9


@criterion(5, "k-medoids equals exhaustive enumeration for n<=8, k<=3")
def test_criterion_5_kmedoids():
    from scipy.spatial.distance import cdist

    rng = np.random.default_rng(55)
    for _ in range(40):
        n = int(rng.integers(2, 9))
        k = int(rng.integers(1, min(3, n) + 1))
        dim = int(rng.integers(1, 5))
        points = rng.normal(0.0, 2.0, (n, dim))
        if rng.random() < 0.3 and n >= 3:
            points[1] = points[0]  # duplicates stay legal
        result = kmedoids(points, k)
        best_obj, _ = brute_force_kmedoids(cdist(points, points), k)
        assert result.objective == pytest.approx(best_obj, abs=1e-9)
        assert all(0 <= m < n for m in result.medoid_ids)
        assert sum(result.probabilities) == Fraction(1)
        assert all(size >= 1 for size in result.cluster_sizes)


@criterion(6, "bootstrap blocks verbatim, in window, correct weekday class")
def test_criterion_6_bootstrap():
    history = make_history(seed=66)
    window_weeks = 8.0
    spec = BootstrapSpec(window_weeks=window_weeks, n_years=5, rng_seed=7)
    result = bootstrap_years(history, spec)
    hist_arrays = {n: s.values for n, s in scenario_channels(history).items()}
    channel_names = list(hist_arrays)
    hist_days = np.stack(
        [
            np.concatenate([hist_arrays[n][d * 24:(d + 1) * 24] for n in channel_names])
            for d in range(365)
        ]
    )
    first_weekday = 1  # the fixture history starts on a Tuesday
    for year in result.years:
        arrays = {n: s.values for n, s in scenario_channels(year).items()}
        for d in range(365):
            block = np.concatenate(
                [arrays[n][d * 24:(d + 1) * 24] for n in channel_names]
            )
            matches = np.where((hist_days == block).all(axis=1))[0]
            assert matches.size >= 1, f"day {d} is not a verbatim historical day"
            ok = False
            for src in matches:
                dist = abs(int(src) - d) % 365
                dist = min(dist, 365 - dist)
                in_window = dist <= 7 * window_weeks
                same_class = ((src + first_weekday) % 7 < 5) == (
                    (d + first_weekday) % 7 < 5
                )
                ok = ok or (in_window and same_class)
            assert ok, f"day {d} matched only outside the window or class"


@criterion(7, "EVPI >= 0 and VSS >= 0 on 20 randomized toy instances")
def test_criterion_7_stochastic_orderings():
    for seed in range(20):
        rng = np.random.default_rng(700 + seed)
        building = simple_building(
            1,
            devices=(
                boiler_spec(cap_max=25.0),
                battery_spec(cap_max=8.0,
                             size_price=float(rng.uniform(5.0, 40.0)),
                             base_price=float(rng.uniform(10.0, 80.0))),
            ),
        )
        cfg = simple_config([building], horizon=24)
        n = int(rng.integers(2, 4))
        weights = rng.uniform(0.2, 1.0, n)
        weights /= weights.sum()
        scenarios = [
            simple_scenario(
                f"s{i}", float(weights[i]), horizon=24,
                el_price=float(rng.uniform(0.1, 0.6)),
                gas_price=float(rng.uniform(0.08, 0.16)),
            )
            for i in range(n)
        ]
        two_stage = solve_centralized(cfg, scenarios)
        objective_integrity(two_stage)
        scale = max(1.0, abs(two_stage.objective))

        ws = wait_and_see_value(cfg, scenarios)
        assert ws <= two_stage.objective + 1e-6 * scale

        ev_plan = solve_centralized(cfg, [expected_value_scenario(scenarios)])
        eev = evaluate_design(cfg, scenarios, ev_plan.designs)
        assert two_stage.objective <= eev.objective + 1e-6 * scale


@criterion(8, "breakdown equals solver objective; slacks zero when removable")
def test_criterion_8_objective_integrity():
    cfg, scenario = storage_exercise_instance()
    plan = solve_centralized(cfg, [scenario])
    objective_integrity(plan)
    ops = plan.operations["s0"]
    assert ops.slack_mv == pytest.approx(0.0, abs=1e-7)
    assert all(v == pytest.approx(0.0, abs=1e-7) for v in ops.slack_lv.values())

    # the same instance stays optimal with every slack pinned to zero,
    # certifying it is feasible without relaxation
    built = build_centralized(cfg, [scenario])
    for sid, refs in built.community_refs.items():
        built.model.add_constraint(
            LinExpr({refs.grid.s_mv.id: 1.0}, 0.0, built.model._model_id),
            Sense.EQ, 0.0, f"noslack_mv_{sid}",
        )
        for bid, var in refs.grid.s_lv.items():
            built.model.add_constraint(
                LinExpr({var.id: 1.0}, 0.0, built.model._model_id),
                Sense.EQ, 0.0, f"noslack_lv_{bid}_{sid}",
            )
    pinned = solve(built.model)
    assert pinned.status == Status.OPTIMAL
    assert pinned.objective == pytest.approx(plan.objective, rel=1e-6)


@criterion(9, "3x3 one-at-a-time sensitivity, byte-pinned nominals, monotone boiler")
def test_criterion_9_sensitivity():
    building = simple_building(1, devices=(boiler_spec(cap_max=30.0),))
    cfg = simple_config([building], horizon=24)
    rng = np.random.default_rng(90)
    scenarios = [
        simple_scenario(
            f"s{i}", 1 / 3, horizon=24,
            t_amb_level=float(rng.uniform(1.0, 8.0)),
            el_price=float(rng.uniform(0.15, 0.4)),
            e_base_scale=float(rng.uniform(0.5, 1.5)),
        )
        for i in range(3)
    ]
    report = run_sensitivity(cfg, scenarios, scenarios, scenarios)
    solves = sum(
        len(spreads[("b1", "BOL")].values) for spreads in report.spreads.values()
    )
    assert solves == 9
    assert report.infeasible == ()

    # pinned channels byte-match the nominals per composed problem
    problems = compose_factor_scenarios(scenarios, scenarios, scenarios)
    for problem in problems:
        for other, nominal_id in problem.nominal_ids.items():
            nominal = next(s for s in scenarios if s.id == nominal_id)
            for composed in problem.scenarios:
                for name, series in scenario_channels(composed).items():
                    from communityplan.scenarios import channel_factor

                    if channel_factor(name) == other:
                        assert np.array_equal(
                            series.values,
                            scenario_channels(nominal)[name].values,
                        )

    # monotone base-load scaling moves the boiler capacity weakly up
    base = simple_scenario(horizon=24, t_amb_level=2.0)
    capacities = []
    for factor in (0.5, 1.0, 2.0):
        occ = {
            bid: type(p)(
                type(p.e_base)(p.e_base.start, 1.0, p.e_base.values * factor,
                               p.e_base.unit),
                p.t_set,
            )
            for bid, p in base.occupant.items()
        }
        scn = Scenario("scale", 1.0, occ, base.economic, base.climate)
        plan = solve_centralized(cfg, [scn])
        objective_integrity(plan)
        capacities.append(plan.designs[("b1", "BOL")].value)
    assert capacities[0] <= capacities[1] + 1e-6
    assert capacities[1] <= capacities[2] + 1e-6


@criterion(10, "seeded reruns are byte-identical: scenarios, LP exports, reports")
def test_criterion_10_reproducibility(tmp_path, monkeypatch):
    def digest_tree(root: Path) -> dict[str, str]:
        return {
            str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*"))
            if p.is_file()
        }

    def one_run(workdir: Path) -> dict[str, str]:
        # identical runs share the same relative layout, so manifests can
        # carry stable input paths
        workdir.mkdir()
        monkeypatch.chdir(workdir)
        history = make_history(seed=101)
        boot = bootstrap_years(history, BootstrapSpec(n_years=6, rng_seed=11))
        reduced, cluster = reduce_scenarios(list(boot.years), k=2, rng_seed=3)
        bundle = Path("scenarios")
        save_scenarios(bundle, reduced, rng_seed=11,
                       probabilities_exact=list(cluster.probabilities))

        building = simple_building(1, devices=(boiler_spec(), battery_spec()))
        cfg = simple_config([building], horizon=48)
        scenarios = [
            Scenario(s.id, s.probability, s.occupant, s.economic, s.climate)
            for s in reduced
        ]
        built = build_centralized(cfg, scenarios)
        Path("model.lp").write_text(export_lp(built.model))
        result = solve(built.model)
        plan = built.extract(result)
        manifest = make_run_manifest(
            bundle / "manifest.json", bundle, "scipy", {"mip_gap": 1e-6},
            {"scenario_rng": 11}, clock="2026-08-10T00:00:00Z",
        )
        emit_reports(plan, Path("reports"), manifest)
        return digest_tree(workdir)

    first = one_run(tmp_path / "run1")
    second = one_run(tmp_path / "run2")
    assert first == second
