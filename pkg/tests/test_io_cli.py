import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from communityplan.cli import main
from communityplan.core import Scenario, Unit, scenario_channels
from communityplan.fixtures import generate_fixture
from communityplan.io import (
    RunManifest,
    emit_reports,
    ingest_community,
    load_plan_result,
    load_scenarios,
    make_run_manifest,
    read_series_csv,
    save_plan_result,
    save_scenarios,
    verify_run_manifest,
    write_series_csv,
)
from communityplan.planner import solve_centralized
from communityplan.scenarios import BootstrapSpec, bootstrap_years

from conftest import battery_spec, boiler_spec, simple_building, simple_config, simple_scenario, ts


def tree_digest(root: Path) -> dict[str, str]:
    out = {}
    for path in sorted(root.rglob("*")):
        if path.is_file():
            out[str(path.relative_to(root))] = hashlib.sha256(
                path.read_bytes()
            ).hexdigest()
    return out


class TestSeriesCsv:
    def test_round_trip(self, tmp_path):
        series = ts(np.linspace(0.0, 5.0, 30), Unit.KILOWATT)
        path = tmp_path / "load.csv"
        write_series_csv(path, series)
        back, warnings = read_series_csv(path, Unit.KILOWATT)
        assert warnings == []
        assert back == series

    def test_header_error_names_file_and_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,power\n2019-01-01T00:00:00,1\n")
        with pytest.raises(ValueError, match=r"bad\.csv:1"):
            read_series_csv(path, Unit.KILOWATT)

    def test_extra_column_warns_but_parses(self, tmp_path):
        path = tmp_path / "extra.csv"
        path.write_text(
            "timestamp,value,comment\n"
            "2019-01-01T00:00:00,1.0,hello\n"
            "2019-01-01T01:00:00,2.0,world\n"
        )
        series, warnings = read_series_csv(path, Unit.KILOWATT)
        assert len(series) == 2
        assert any("extra columns" in w for w in warnings)

    def test_non_uniform_spacing_rejected(self, tmp_path):
        path = tmp_path / "gap.csv"
        path.write_text(
            "timestamp,value\n"
            "2019-01-01T00:00:00,1.0\n"
            "2019-01-01T01:00:00,2.0\n"
            "2019-01-01T03:00:00,3.0\n"
        )
        with pytest.raises(ValueError, match="uniform"):
            read_series_csv(path, Unit.KILOWATT)


class TestFixture:
    def test_deterministic_in_n_and_seed(self, tmp_path):
        a = generate_fixture(tmp_path / "a", 3, seed=11)
        b = generate_fixture(tmp_path / "b", 3, seed=11)
        assert tree_digest(a) == tree_digest(b)
        c = generate_fixture(tmp_path / "c", 3, seed=12)
        assert tree_digest(a) != tree_digest(c)

    def test_paper_scale_roster_validates(self, tmp_path):
        directory = generate_fixture(tmp_path / "big", 41, seed=1)
        ingest = ingest_community(directory)
        assert len(ingest.config.buildings) == 41
        assert len(ingest.history.climate.t_amb) == 8760
        assert ingest.warnings == ()

    def test_missing_price_file_named_error(self, tmp_path):
        directory = generate_fixture(tmp_path / "x", 2, seed=2)
        (directory / "history" / "p_el.csv").unlink()
        with pytest.raises(ValueError, match=r"p_el\.csv"):
            ingest_community(directory)

    def test_unknown_device_named_error(self, tmp_path):
        directory = generate_fixture(tmp_path / "y", 1, seed=3)
        config = json.loads((directory / "config.json").read_text())
        config["buildings"][0]["devices"].append("FUSION")
        (directory / "config.json").write_text(json.dumps(config))
        with pytest.raises(ValueError, match="FUSION"):
            ingest_community(directory)


class TestScenarioBundles:
    def test_save_load_round_trip(self, tmp_path):
        scenarios = [
            simple_scenario("a", 0.25, horizon=30),
            simple_scenario("b", 0.75, horizon=30, t_amb_level=9.0),
        ]
        save_scenarios(tmp_path / "bundle", scenarios, rng_seed=5)
        back, manifest = load_scenarios(tmp_path / "bundle")
        assert manifest["rng_seed"] == 5
        assert [s.id for s in back] == ["a", "b"]
        for original, loaded in zip(scenarios, back):
            assert loaded.probability == original.probability
            for name, series in scenario_channels(original).items():
                assert np.array_equal(
                    scenario_channels(loaded)[name].values, series.values
                )

    def test_bootstrap_provenance_persisted(self, tmp_path):
        history = simple_scenario("hist", 1.0, horizon=8760)
        result = bootstrap_years(history, BootstrapSpec(n_years=2, rng_seed=3))
        save_scenarios(
            tmp_path / "boot", list(result.years), rng_seed=3,
            source_days=list(result.source_days),
        )
        _, manifest = load_scenarios(tmp_path / "boot")
        assert manifest["scenarios"][0]["source_days"] == list(result.source_days[0])

    def test_missing_manifest_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="manifest"):
            load_scenarios(tmp_path / "nothing")


class TestPlanResultRoundTrip:
    def test_identical_structures(self, tmp_path, boiler_community):
        cfg, scenario = boiler_community
        plan = solve_centralized(cfg, [scenario])
        path = tmp_path / "plan_result.json"
        save_plan_result(path, plan)
        back = load_plan_result(path)
        assert back.designs == plan.designs
        assert back.breakdown == plan.breakdown
        assert back.operations == plan.operations
        # solver meta round-trips minus wall-clock keys, via its JSON image
        filtered = {
            k: v for k, v in plan.solve_meta.items() if k != "wall_time_s"
        }
        assert json.loads(json.dumps(filtered, sort_keys=True, default=str)) == \
            json.loads(json.dumps(dict(back.solve_meta), sort_keys=True, default=str))


class TestReports:
    def warm_plan(self):
        # warm climate, battery priced out of the market: chi stays zero
        building = simple_building(
            1, devices=(battery_spec(size_price=1e5, base_price=1e6),)
        )
        cfg = simple_config([building], horizon=24)
        scenario = simple_scenario(horizon=24, t_amb_level=25.0, t_set_day=17.0)
        return solve_centralized(cfg, [scenario])

    def test_zero_existence_design_table(self, tmp_path):
        plan = self.warm_plan()
        files = emit_reports(plan, tmp_path)
        table = (tmp_path / "design_table.csv").read_text().splitlines()
        assert table[0] == "entity,device,chi,value"
        assert all(row.split(",")[2] == "0" for row in table[1:])
        assert {f.name for f in files} >= {
            "plan_result.json", "objective_breakdown.json", "design_table.csv",
            "traces.csv",
        }

    def test_traces_shape(self, tmp_path):
        building_ids = (1, 2)
        buildings = [simple_building(b, devices=(boiler_spec(),)) for b in building_ids]
        cfg = simple_config(buildings, horizon=24)
        scenario = simple_scenario(horizon=24, building_ids=building_ids)
        plan = solve_centralized(cfg, [scenario])
        emit_reports(plan, tmp_path)
        rows = (tmp_path / "traces.csv").read_text().splitlines()
        assert len(rows) - 1 == 24 * len(building_ids)

    def test_breakdown_identity_guard(self, tmp_path):
        plan = self.warm_plan()
        broken = type(plan.breakdown)(
            o_inv_lvl=plan.breakdown.o_inv_lvl + 5.0,
            o_opr=plan.breakdown.o_opr,
            o_co2=plan.breakdown.o_co2,
            o_slk=plan.breakdown.o_slk,
            o_tot=plan.breakdown.o_tot,
            per_scenario=plan.breakdown.per_scenario,
        )
        tampered = type(plan)(
            designs=plan.designs, breakdown=broken, operations=plan.operations,
            solve_meta=plan.solve_meta,
        )
        with pytest.raises(ValueError, match="identity"):
            emit_reports(tampered, tmp_path)


class TestRunManifest:
    def test_hashes_verify_and_detect_drift(self, tmp_path):
        directory = generate_fixture(tmp_path / "fx", 1, seed=4)
        manifest = make_run_manifest(
            directory / "config.json", None, "scipy", {"mip_gap": 1e-6},
            {"scenario_rng": 7}, clock="2026-01-01T00:00:00Z",
        )
        assert verify_run_manifest(manifest) == []
        (directory / "config.json").write_text("{}")
        assert verify_run_manifest(manifest) != []

    def test_round_trip(self, tmp_path):
        directory = generate_fixture(tmp_path / "fx2", 1, seed=4)
        manifest = make_run_manifest(
            directory / "config.json", None, "scipy", {}, {}, clock="t0",
        )
        back = RunManifest.from_dict(manifest.as_dict())
        assert back == manifest


class TestCli:
    def run(self, *argv):
        return main(list(argv))

    def test_full_flow_and_exit_codes(self, tmp_path, capsys):
        fx = tmp_path / "fx"
        assert self.run("fixture", "--out", str(fx), "--buildings", "2",
                        "--seed", "6") == 0
        assert self.run("validate", "--dir", str(fx)) == 0

        bundle = tmp_path / "scn"
        assert self.run(
            "scenarios", "generate", "--dir", str(fx), "--out", str(bundle),
            "--years", "4", "--seed", "1",
        ) == 0
        reduced = tmp_path / "scn2"
        assert self.run(
            "scenarios", "reduce", "--scenarios", str(bundle), "--out",
            str(reduced), "--k", "2", "--seed", "1",
        ) == 0
        assert self.run(
            "scenarios", "nominal", "--scenarios", str(reduced), "--factor", "occ"
        ) == 0

        out = tmp_path / "plan"
        assert self.run(
            "plan", "centralized", "--dir", str(fx), "--scenarios", str(reduced),
            "--out", str(out), "--horizon", "24",
        ) == 0
        assert (out / "plan_result.json").exists()
        assert (out / "run_manifest.json").exists()

        rep = tmp_path / "rep"
        assert self.run(
            "report", "--plan", str(out / "plan_result.json"), "--out", str(rep)
        ) == 0
        assert (rep / "traces.csv").read_bytes() == (out / "traces.csv").read_bytes()

    def test_validation_failure_is_user_error(self, tmp_path):
        fx = generate_fixture(tmp_path / "fx", 1, seed=9)
        config = json.loads((fx / "config.json").read_text())
        config["lv_limit"] = 0.0
        (fx / "config.json").write_text(json.dumps(config))
        assert self.run("validate", "--dir", str(fx)) == 1

    def test_missing_dir_is_user_error(self, tmp_path):
        assert self.run("validate", "--dir", str(tmp_path / "nope")) == 1

    def test_bad_flag_is_user_error(self):
        assert self.run("validate", "--no-such-flag") == 1

    def test_solver_failure_exit_code(self, tmp_path):
        fx = generate_fixture(tmp_path / "fx", 1, seed=10)
        bundle = tmp_path / "scn"
        history = ingest_community(fx).history
        save_scenarios(bundle, [Scenario("h", 1.0, history.occupant,
                                         history.economic, history.climate)])
        code = self.run(
            "plan", "centralized", "--dir", str(fx), "--scenarios", str(bundle),
            "--out", str(tmp_path / "out"), "--horizon", "24",
            "--solver", "no-such-binary {model} {sol}",
        )
        assert code == 2

    def test_env_solver_template(self, tmp_path, monkeypatch):
        monkeypatch.setenv("COMMUNITYPLAN_SOLVER", "still-not-a-solver {model} {sol}")
        fx = generate_fixture(tmp_path / "fx", 1, seed=10)
        bundle = tmp_path / "scn"
        history = ingest_community(fx).history
        save_scenarios(bundle, [Scenario("h", 1.0, history.occupant,
                                         history.economic, history.climate)])
        code = self.run(
            "plan", "centralized", "--dir", str(fx), "--scenarios", str(bundle),
            "--out", str(tmp_path / "out"), "--horizon", "24",
        )
        assert code == 2
