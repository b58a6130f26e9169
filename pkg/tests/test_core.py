import numpy as np
import pytest

from communityplan.core import (
    DeviceSpec,
    TimeSeries,
    Unit,
    align_scenarios,
    validate_config,
)

from conftest import (
    START,
    boiler_spec,
    simple_building,
    simple_config,
    simple_scenario,
    ts,
)


class TestTimeSeries:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            TimeSeries(START, 1.0, np.array([]), Unit.DEGC)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            ts([1.0, np.nan])

    def test_rejects_zero_step(self):
        with pytest.raises(ValueError):
            TimeSeries(START, 0.0, np.array([1.0]), Unit.DEGC)

    def test_values_are_read_only(self):
        series = ts([1.0, 2.0])
        with pytest.raises(ValueError):
            series.values[0] = 9.0

    def test_truncated(self):
        series = ts([1.0, 2.0, 3.0])
        assert list(series.truncated(2).values) == [1.0, 2.0]
        with pytest.raises(ValueError):
            series.truncated(5)


class TestValidateConfig:
    def test_well_formed_two_buildings_pass(self):
        cfg = simple_config(
            [simple_building(1, devices=(boiler_spec(),)), simple_building(2)],
            horizon=24,
        )
        assert validate_config(cfg) == []

    def test_zero_lv_limit_single_violation(self):
        cfg = simple_config([simple_building(1)], horizon=24, lv_limit=0.0)
        violations = validate_config(cfg)
        assert len(violations) == 1
        assert "lv_limit > 0" in violations[0]

    def test_eta_out_of_range(self):
        bad = DeviceSpec(kind="BAT", cap_min=0, cap_max=5, eta_ch=1.2)
        cfg = simple_config([simple_building(1, devices=(bad,))], horizon=24)
        violations = validate_config(cfg)
        assert any("eta_" in v and "eta_ch" in v for v in violations)

    def test_cap_bounds_and_lifetime(self):
        bad = DeviceSpec(kind="BAT", cap_min=5, cap_max=1, lifetime_years=0.5)
        cfg = simple_config([simple_building(1, devices=(bad,))], horizon=24)
        violations = validate_config(cfg)
        assert any("cap_min <= cap_max" in v for v in violations)
        assert any("tau >= 1" in v for v in violations)

    def test_rc_key_set_must_match_order(self):
        rc = simple_building(1).rc
        bad_rc = type(rc)(
            order=2,
            resistances={"R_ia": 1e-2},  # missing R_ie, R_ea
            capacities={"C_i": 1e7, "C_e": 4e7},
            window_area=2.0,
        )
        cfg = simple_config([simple_building(1, rc=bad_rc)], horizon=24)
        violations = validate_config(cfg)
        assert any("resistances" in v and "order 2" in v for v in violations)

    def test_missing_required_extra(self):
        bad = DeviceSpec(kind="BOL", cap_min=1, cap_max=10)
        cfg = simple_config([simple_building(1, devices=(bad,))], horizon=24)
        assert any("missing required key 'eta'" in v for v in validate_config(cfg))

    def test_idempotent_and_side_effect_free(self):
        cfg = simple_config([simple_building(1)], horizon=24, lv_limit=0.0)
        first = validate_config(cfg)
        second = validate_config(cfg)
        assert first == second
        assert cfg.lv_limit == 0.0

    def test_no_buildings(self):
        cfg = simple_config([simple_building(1)], horizon=24)
        empty = type(cfg)(
            buildings=(),
            lv_limit=cfg.lv_limit,
            mv_limit=cfg.mv_limit,
            slack_price=cfg.slack_price,
            discount_rate=cfg.discount_rate,
            horizon_steps=cfg.horizon_steps,
            step_hours=cfg.step_hours,
        )
        assert any("at least one building" in v for v in validate_config(empty))


class TestAlignScenarios:
    def test_equal_lengths_unchanged(self):
        scenarios = [
            simple_scenario("a", 0.5, horizon=48),
            simple_scenario("b", 0.5, horizon=48),
        ]
        aligned = align_scenarios(scenarios)
        assert [len(s.climate.t_amb) for s in aligned] == [48, 48]
        assert np.array_equal(
            aligned[0].climate.t_amb.values, scenarios[0].climate.t_amb.values
        )

    def test_probability_renormalization(self):
        scenarios = [
            simple_scenario("a", 0.2, horizon=24),
            simple_scenario("b", 0.2, horizon=24),
        ]
        aligned = align_scenarios(scenarios)
        assert [s.probability for s in aligned] == [0.5, 0.5]
        assert abs(sum(s.probability for s in aligned) - 1.0) < 1e-12

    def test_min_truncation(self):
        scenarios = [
            simple_scenario("a", 0.5, horizon=72),
            simple_scenario("b", 0.5, horizon=48),
        ]
        aligned = align_scenarios(scenarios)
        assert all(len(s.climate.t_amb) == 48 for s in aligned)
        assert all(len(s.occupant[1].e_base) == 48 for s in aligned)

    def test_empty_input(self):
        with pytest.raises(ValueError):
            align_scenarios([])

    def test_incompatible_steps(self):
        a = simple_scenario("a", 0.5, horizon=24)
        b = simple_scenario("b", 0.5, horizon=24)
        slow = type(a.climate)(
            ts(a.climate.t_amb.values, step=2.0), a.climate.i_sol
        )
        b = type(b)(b.id, b.probability, b.occupant, b.economic, slow)
        with pytest.raises(ValueError, match="step"):
            align_scenarios([a, b])

    def test_zero_mass(self):
        scenarios = [simple_scenario("a", 0.0, horizon=24)]
        with pytest.raises(ValueError, match="zero"):
            align_scenarios(scenarios)
