"""Randomized invariant checks driven by hypothesis.

Device powers are drawn from powers of two and energies, durations, and
request levels from whole numbers, so every time-to-go e / p and every
transform value is an exact binary64 dyadic rational.  On such instances
structural identities can be asserted with plain == : a failure is a logic
bug, not rounding.  Where a computation genuinely rounds (proportional
splits, bisection, analytic boundaries) the assertions carry explicit
tolerances sized well above the measured noise floor of ~4e-16 relative.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from flexcap import (
    Device,
    ScenarioConfig,
    StepSignal,
    capacity_curve,
    clustered_capacity_lower_bound,
    dominates,
    ep_transform,
    feasibility_probability,
    find_violation,
    flexibility_gap,
    flow_feasible,
    is_feasible,
    lpf_dispatch,
    make_fleet,
    max_feasible_truncation,
    max_pulse,
    max_ramp,
    optimal_dispatch,
    permute_segments,
    pop_dispatch,
    simulate,
    truncate,
)

# powers of two keep e / p exact; whole joules and seconds keep sums exact
DYADIC_POWERS = st.sampled_from([1.0, 2.0, 4.0, 8.0, 16.0, 32.0])
WHOLE_JOULES = st.integers(min_value=0, max_value=2048).map(float)
SEGMENT_SECONDS = st.integers(min_value=1, max_value=900).map(float)
REQUEST_WATTS = st.integers(min_value=0, max_value=120).map(float)

POLICIES = st.sampled_from(["op", "lpf", "pop"])


@st.composite
def fleets(draw, max_devices=6):
    n = draw(st.integers(1, max_devices))
    return make_fleet(
        [Device(f"d{i}", draw(DYADIC_POWERS), draw(WHOLE_JOULES)) for i in range(n)]
    )


@st.composite
def signals(draw, max_segments=4):
    n = draw(st.integers(1, max_segments))
    return StepSignal.from_segments(
        [(draw(SEGMENT_SECONDS), draw(REQUEST_WATTS)) for _ in range(n)]
    )


@st.composite
def float_signals(draw, max_segments=5):
    # distinct values must be separated enough that each one's energy
    # contribution stays far above one ulp of the total; a stored float
    # curve cannot render a slope whose increment rounds away entirely
    n = draw(st.integers(1, max_segments))
    span = st.floats(min_value=-3.0, max_value=6.0, allow_nan=False)
    durations = [math.exp(draw(span)) for _ in range(n)]
    values = [math.exp(draw(span)) for _ in range(n)]
    assume(
        all(
            a == b or abs(a - b) > 1e-4 * max(a, b)
            for i, a in enumerate(values)
            for b in values[:i]
        )
    )
    return StepSignal.from_segments(list(zip(durations, values)))


def segments_of(signal):
    bounds = list(signal.breakpoints) + [signal.horizon]
    return [(bounds[i + 1] - bounds[i], signal.values[i]) for i in range(len(signal.values))]


class TestTransformShape:
    @given(signal=signals())
    def test_intercepts_pin_totals(self, signal):
        curve = ep_transform(signal)
        assert curve.e_intercept == signal.total_energy()
        assert curve.p_intercept == signal.sup()

    @given(signal=signals())
    def test_dyadic_curves_are_convex_and_nonincreasing(self, signal):
        curve = ep_transform(signal)
        assert curve.is_nonincreasing()
        assert curve.is_convex()

    @given(signal=float_signals())
    def test_float_curves_are_convex_and_nonincreasing(self, signal):
        curve = ep_transform(signal)
        assert curve.is_nonincreasing()
        assert curve.is_convex()

    @given(fleet=fleets())
    def test_capacity_is_convex_and_nonincreasing(self, fleet):
        curve = capacity_curve(fleet)
        assert curve.is_nonincreasing()
        assert curve.is_convex()

    @given(signal=signals(), data=st.data())
    def test_rearrangement_leaves_transform_bitwise_identical(self, signal, data):
        segs = segments_of(signal)
        order = data.draw(st.permutations(range(len(segs))))
        permuted = StepSignal.from_segments([segs[i] for i in order])
        a = ep_transform(signal)
        b = ep_transform(permuted)
        assert a.breakpoints() == b.breakpoints()


class TestDominance:
    @given(signal=signals())
    def test_reflexive_without_slack(self, signal):
        curve = ep_transform(signal)
        assert dominates(curve, curve, rtol=0.0)
        assert find_violation(curve, curve, rtol=0.0) is None

    @given(sa=signals(), sb=signals())
    def test_violation_witness_agrees_with_verdict(self, sa, sb):
        a = ep_transform(sa)
        b = ep_transform(sb)
        witness = find_violation(a, b, rtol=0.0)
        assert (witness is None) == dominates(a, b, rtol=0.0)
        if witness is not None:
            assert b.evaluate(witness) > a.evaluate(witness)

    @given(fleet=fleets(max_devices=6), data=st.data())
    def test_capacity_monotone_under_device_removal(self, fleet, data):
        devices = list(fleet.devices)
        assume(len(devices) > 1)
        keep = data.draw(
            st.sets(st.integers(0, len(devices) - 1), min_size=1, max_size=len(devices) - 1)
        )
        sub = make_fleet([devices[i] for i in sorted(keep)])
        assert dominates(capacity_curve(fleet), capacity_curve(sub), rtol=0.0)

    @given(fleet=fleets(), k=st.integers(1, 8))
    def test_clustered_bound_never_exceeds_capacity(self, fleet, k):
        cap = capacity_curve(fleet)
        low = clustered_capacity_lower_bound(fleet, min(k, len(fleet.groups)))
        assert dominates(cap, low, rtol=0.0)

    @given(fleet=fleets())
    def test_flexibility_gap_nonnegative(self, fleet):
        gap = flexibility_gap(fleet)
        assert gap >= 0.0
        if len(fleet.groups) == 1:
            assert gap == 0.0


class TestFeasibility:
    @settings(max_examples=150, deadline=None)
    @given(fleet=fleets(max_devices=4), signal=signals(max_segments=3))
    def test_dominance_matches_flow_oracle(self, fleet, signal):
        assert is_feasible(signal, fleet) == flow_feasible(fleet, signal)

    @settings(max_examples=150, deadline=None)
    @given(fleet=fleets(max_devices=4), signal=signals(max_segments=3))
    def test_feasible_iff_optimal_policy_survives(self, fleet, signal):
        ttf = simulate(fleet, signal).time_to_failure
        assert (ttf == math.inf) == flow_feasible(fleet, signal)

    @given(fleet=fleets(), signal=signals(), data=st.data())
    def test_verdict_invariant_under_segment_permutation(self, fleet, signal, data):
        cuts = list(signal.breakpoints[1:])
        order = data.draw(st.permutations(range(len(cuts) + 1)))
        permuted = permute_segments(signal, cuts=cuts, order=order)
        assert is_feasible(permuted, fleet) == is_feasible(signal, fleet)

    @settings(deadline=None)
    @given(fleet=fleets(), signal=signals())
    def test_truncation_boundary_brackets_feasibility(self, fleet, signal):
        mft = max_feasible_truncation(fleet, signal)
        assert 0.0 <= mft <= signal.horizon
        if mft == signal.horizon:
            assert is_feasible(signal, fleet)
        else:
            assert not is_feasible(signal, fleet)
            if mft > 0.0:
                assert is_feasible(truncate(signal, 0.0, mft), fleet)
        ttf = simulate(fleet, signal).time_to_failure
        assert mft == pytest.approx(min(ttf, signal.horizon), rel=1e-12, abs=1e-9)


class TestDispatch:
    @given(fleet=fleets(), request=REQUEST_WATTS)
    def test_allocations_respect_ratings_and_totals(self, fleet, request):
        available = sum(d.p_max for d in fleet.devices if d.energy > 0.0)
        expect = min(request, available)
        for fn in (optimal_dispatch, lpf_dispatch, pop_dispatch):
            res = fn(fleet, request)
            assert len(res.allocation) == len(fleet.devices)
            for x, d in zip(res.allocation, fleet.devices):
                assert 0.0 <= x <= d.p_max * (1.0 + 1e-12)
                if d.energy == 0.0:
                    assert x == 0.0
            assert res.total == pytest.approx(expect, rel=1e-12, abs=1e-9)
            assert sum(res.allocation) == pytest.approx(expect, rel=1e-12, abs=1e-9)
            assert res.deficit == pytest.approx(
                max(0.0, request - available), rel=1e-12, abs=1e-9
            )

    @settings(deadline=None)
    @given(fleet=fleets(max_devices=5), signal=signals(max_segments=3), policy=POLICIES)
    def test_energy_is_conserved(self, fleet, signal, policy):
        total0 = sum(d.energy for d in fleet.devices)
        traj = simulate(fleet, signal, policy=policy)
        total1 = sum(d.energy for d in traj.final_state().devices)
        assert traj.delivered_energy() + total1 == pytest.approx(
            total0, rel=1e-12, abs=1e-9
        )

    @settings(deadline=None)
    @given(fleet=fleets(max_devices=5), signal=signals(max_segments=3))
    def test_optimal_policy_maximizes_time_to_failure(self, fleet, signal):
        h = signal.horizon
        ttf = {
            policy: min(simulate(fleet, signal, policy=policy).time_to_failure, h)
            for policy in ("op", "lpf", "pop")
        }
        slack = 1e-12 * max(1.0, h)
        assert ttf["op"] >= ttf["lpf"] - slack
        assert ttf["op"] >= ttf["pop"] - slack

    @settings(deadline=None)
    @given(fleet=fleets(max_devices=4), signal=signals(max_segments=3), policy=POLICIES)
    def test_halting_never_delivers_more(self, fleet, signal, policy):
        full = simulate(fleet, signal, policy=policy)
        halted = simulate(fleet, signal, policy=policy, halt_on_failure=True)
        assert halted.time_to_failure == full.time_to_failure
        limit = full.delivered_energy()
        assert halted.delivered_energy() <= limit + 1e-9 * max(1.0, limit)


class TestServices:
    @settings(deadline=None)
    @given(fleet=fleets(), duration=st.sampled_from([0.5, 1.0, 2.0, 4.0, 7.5, 16.0, 300.0, 3600.0]))
    def test_max_pulse_sits_on_the_boundary(self, fleet, duration):
        level = max_pulse(fleet, duration)
        assert level >= 0.0
        assert is_feasible(StepSignal.constant(level, duration), fleet)
        assume(level * duration > 1e-3)
        heavier = StepSignal.constant(level * (1.0 + 1e-6), duration)
        assert not is_feasible(heavier, fleet)

    @settings(max_examples=40, deadline=None)
    @given(fleet=fleets(max_devices=4), gradient=st.sampled_from([0.25, 0.5, 1.0, 2.0, 4.0]))
    def test_max_ramp_monotone_in_gradient(self, fleet, gradient):
        assume(capacity_curve(fleet).e_intercept > 0.0)
        gentle = max_ramp(fleet, gradient)
        steep = max_ramp(fleet, 2.0 * gradient)
        assert steep <= gentle * (1.0 + 1e-6) + 1e-9

    @settings(max_examples=30, deadline=None)
    @given(
        fleet=fleets(max_devices=4),
        seed=st.integers(0, 2**31 - 1),
        samples=st.integers(1, 25),
    )
    def test_probability_estimate_is_well_formed(self, fleet, seed, samples):
        config = ScenarioConfig(
            device_count=4,
            ttg_hours=(0.0, 4.0),
            power_kw=(0.0, 1.0),
            request_mean_mw=0.002,
            request_sd_mw=0.001,
            interval_hours=1.0,
            horizon_hours=4.0,
            seed=seed,
        )
        est = feasibility_probability(fleet, config, samples=samples)
        assert est.samples == samples
        assert 0 <= est.feasible <= samples
        assert est.probability == est.feasible / samples
        assert 0.0 <= est.ci_low <= est.probability <= est.ci_high <= 1.0


class TestSignals:
    @given(signal=signals(), data=st.data())
    def test_value_lookup_is_right_open(self, signal, data):
        i = data.draw(st.integers(0, len(signal.values) - 1))
        assert signal.value_at(signal.breakpoints[i]) == signal.values[i]

    @given(signal=signals(), data=st.data())
    def test_truncating_a_prefix_twice_equals_once(self, signal, data):
        h = int(signal.horizon)
        b = float(data.draw(st.integers(1, h)))
        c = float(data.draw(st.integers(1, h)))
        assume(c <= b)
        assert truncate(truncate(signal, 0.0, b), 0.0, c) == truncate(signal, 0.0, c)
