"""Service sizing, fleet comparison, scenario draws and the MC estimate."""

import math

import numpy as np
import pytest

from flexcap import (
    Device,
    InvalidConfig,
    InvalidDuration,
    InvalidGradient,
    ScenarioConfig,
    StepSignal,
    compare_fleets,
    ep_transform,
    capacity_curve,
    dominates,
    feasibility_probability,
    generate_scenario,
    is_feasible,
    make_fleet,
    max_feasible_truncation,
    max_pulse,
    max_ramp,
    simulate,
    time_to_failure,
)

from conftest import HOUR, KW, KWH


class TestMaxPulse:
    def test_energy_limited(self, fleet_a):
        # Binding at the 4 kW breakpoint: 4 + 36 kWh / 5 h.
        assert max_pulse(fleet_a, 5 * HOUR) / KW == 11.2

    def test_power_limited(self, fleet_a):
        assert max_pulse(fleet_a, 2 * HOUR) == 22 * KW

    def test_result_is_feasible_boundary(self, fleet_a):
        for duration in (1.5 * HOUR, 5 * HOUR, 9 * HOUR):
            m = max_pulse(fleet_a, duration)
            assert is_feasible(StepSignal.constant(m, duration), fleet_a)
            assert not is_feasible(
                StepSignal.constant(m * (1 + 1e-6), duration), fleet_a
            )

    def test_empty_fleet_energy(self):
        fleet = make_fleet([Device("x", 5.0, 0.0)])
        assert max_pulse(fleet, 10.0) == 0.0

    @pytest.mark.parametrize("duration", [0.0, -1.0, math.inf, math.nan, "2h"])
    def test_invalid_duration(self, fleet_a, duration):
        with pytest.raises(InvalidDuration):
            max_pulse(fleet_a, duration)


class TestMaxRamp:
    def test_known_duration(self, fleet_a):
        # Binding at 4 kW: (2T - 4)^2 / 4 <= 36 gives T <= 8 h.
        g = 2 * KW / HOUR
        assert max_ramp(fleet_a, g) == pytest.approx(8 * HOUR, rel=1e-8)

    def test_single_device(self, fleet_b):
        # Line capacity: against (0, 104 kWh) -> (13 kW, 0) the gradient
        # 13 kW/h ramp fits exactly up to one hour.
        g = 13 * KW / HOUR
        assert max_ramp(fleet_b, g) == pytest.approx(1 * HOUR, rel=1e-8)

    def test_result_sandwich(self, fleet_c):
        g = 3 * KW / HOUR
        T = max_ramp(fleet_c, g)
        # staircase overapproximation of the ramp from above stays feasible
        # only if the ramp itself does; check by dominance on fine steps
        n = 400
        edges = np.linspace(0.0, T, n + 1)
        s = StepSignal.from_segments(
            [(edges[k + 1] - edges[k], g * edges[k]) for k in range(n)]
        )
        assert is_feasible(s, fleet_c)

    def test_zero_capacity(self):
        fleet = make_fleet([Device("x", 5.0, 0.0)])
        assert max_ramp(fleet, 1.0) == 0.0

    @pytest.mark.parametrize("gradient", [0.0, -2.0, math.inf, math.nan])
    def test_invalid_gradient(self, fleet_a, gradient):
        with pytest.raises(InvalidGradient):
            max_ramp(fleet_a, gradient)


class TestTruncation:
    def test_matches_time_to_failure(self, fleet_a):
        signal = StepSignal.constant(22 * KW, 3 * HOUR)
        assert max_feasible_truncation(fleet_a, signal) == 7200.0
        assert time_to_failure(fleet_a, signal) == 7200.0

    def test_fully_feasible_returns_horizon(self, fleet_a):
        signal = StepSignal.constant(22 * KW, 2 * HOUR)
        assert max_feasible_truncation(fleet_a, signal) == signal.horizon

    def test_infeasible_from_start(self, fleet_a):
        signal = StepSignal.constant(23 * KW, 1 * HOUR)
        assert max_feasible_truncation(fleet_a, signal) == 0.0
        assert time_to_failure(fleet_a, signal) == 0.0

    def test_binding_in_later_segment(self, fleet_a):
        signal = StepSignal.from_segments([(1 * HOUR, 4 * KW), (9 * HOUR, 22 * KW)])
        t = max_feasible_truncation(fleet_a, signal)
        assert t == pytest.approx(3 * HOUR, rel=1e-12)
        assert t == time_to_failure(fleet_a, signal)

    def test_zero_horizon(self, fleet_a):
        assert max_feasible_truncation(fleet_a, StepSignal((), (), 0.0)) == 0.0

    def test_policy_ranking(self, fleet_a):
        signal = StepSignal.from_segments([(1 * HOUR, 4 * KW), (2 * HOUR, 22 * KW)])
        ttf_op = time_to_failure(fleet_a, signal, policy="op")
        for policy in ("lpf", "pop"):
            assert ttf_op >= time_to_failure(fleet_a, signal, policy=policy)


class TestCompareFleets:
    def test_dominance(self, fleet_a, fleet_c):
        v = compare_fleets(fleet_c, fleet_a)
        assert v.relation == "a_dominates"
        assert v.witness_p == 8 * KW
        v = compare_fleets(fleet_a, fleet_c)
        assert v.relation == "b_dominates"
        assert v.witness_p == 8 * KW

    def test_incomparable(self, fleet_a, fleet_b):
        v = compare_fleets(fleet_a, fleet_b)
        assert v.relation == "incomparable"
        assert v.witness_p == 4 * KW

    def test_equivalent(self, fleet_a):
        clone = make_fleet(fleet_a.devices)
        v = compare_fleets(fleet_a, clone)
        assert v.relation == "equivalent"
        assert v.witness_p is None

    def test_tolerance_widens_equivalence(self, fleet_a):
        nudged = make_fleet(
            [
                Device("a1", 4 * KW, 108.0001 * KWH),
                Device("a2", 18 * KW, 36 * KWH),
            ]
        )
        assert compare_fleets(fleet_a, nudged).relation == "b_dominates"
        assert compare_fleets(fleet_a, nudged, rtol=1e-5).relation == "equivalent"


class TestScenarios:
    CONFIG = ScenarioConfig(
        device_count=50,
        ttg_hours=(0.0, 10.0),
        power_kw=(0.0, 1.5),
        request_mean_mw=0.02,
        request_sd_mw=0.008,
        interval_hours=1.0,
        horizon_hours=24.0,
        seed=42,
    )

    def test_fleet_depends_only_on_seed(self):
        f1, s1 = generate_scenario(self.CONFIG, index=0)
        f2, s2 = generate_scenario(self.CONFIG, index=1)
        assert f1.devices == f2.devices
        assert s1 != s2

    def test_draws_are_reproducible(self):
        a = generate_scenario(self.CONFIG, index=3)
        b = generate_scenario(self.CONFIG, index=3)
        assert a[0].devices == b[0].devices
        assert a[1] == b[1]

    def test_fleet_respects_bounds(self):
        fleet, _ = generate_scenario(self.CONFIG)
        assert fleet.size == 50
        for d in fleet.devices:
            assert 0 < d.p_max <= 1.5 * KW
            assert 0 <= d.ttg <= 10 * HOUR

    def test_signal_shape(self):
        _, signal = generate_scenario(self.CONFIG, index=5)
        assert signal.horizon == 24 * HOUR
        assert all(v >= 0 for v in signal.values)

    def test_partial_last_interval(self):
        config = ScenarioConfig(
            device_count=3,
            ttg_hours=(1.0, 2.0),
            power_kw=(1.0, 2.0),
            request_mean_mw=0.001,
            request_sd_mw=0.0,
            interval_hours=1.0,
            horizon_hours=2.5,
            seed=7,
        )
        _, signal = generate_scenario(config)
        assert signal.horizon == 2.5 * HOUR
        ends = [end for _, end, _ in signal.segments()]
        assert ends[-1] - ends[-2] == pytest.approx(0.5 * HOUR)

    @pytest.mark.parametrize(
        "field,value",
        [
            ("device_count", 0),
            ("ttg_hours", (5.0, 1.0)),
            ("power_kw", (0.0, 0.0)),
            ("request_sd_mw", -1.0),
            ("interval_hours", 0.0),
            ("horizon_hours", -1.0),
            ("seed", -2),
        ],
    )
    def test_invalid_config(self, field, value):
        kwargs = {
            "device_count": 3,
            "ttg_hours": (1.0, 2.0),
            "power_kw": (1.0, 2.0),
            "request_mean_mw": 0.001,
            "request_sd_mw": 0.0,
            "interval_hours": 1.0,
            "horizon_hours": 2.0,
            "seed": 0,
        }
        kwargs[field] = value
        with pytest.raises(InvalidConfig):
            ScenarioConfig(**kwargs)


class TestFeasibilityProbability:
    CONFIG = TestScenarios.CONFIG

    def test_counts_match_direct_check(self):
        fleet, _ = generate_scenario(self.CONFIG)
        est = feasibility_probability(fleet, self.CONFIG, samples=60)
        cap = capacity_curve(fleet)
        direct = sum(
            dominates(cap, ep_transform(generate_scenario(self.CONFIG, i)[1]))
            for i in range(60)
        )
        assert est.feasible == direct
        assert est.samples == 60
        assert est.probability == est.feasible / 60

    def test_worker_split_does_not_change_counts(self):
        fleet, _ = generate_scenario(self.CONFIG)
        serial = feasibility_probability(fleet, self.CONFIG, samples=40, workers=1)
        split = feasibility_probability(fleet, self.CONFIG, samples=40, workers=4)
        assert serial == split

    def test_wilson_interval(self, fleet_a):
        est = feasibility_probability(fleet_a, self.CONFIG, samples=30)
        assert 0.0 <= est.ci_low <= est.probability <= est.ci_high <= 1.0

    def test_invalid_samples(self, fleet_a):
        with pytest.raises(InvalidConfig):
            feasibility_probability(fleet_a, self.CONFIG, samples=0)
        with pytest.raises(InvalidConfig):
            feasibility_probability(fleet_a, self.CONFIG, samples=10, workers=0)
