"""Device, fleet grouping, and step signal behaviour."""

import math

import numpy as np
import pytest

from flexcap import (
    Device,
    EmptyFleet,
    InvalidDevice,
    InvalidPartition,
    InvalidSignal,
    InvalidWindow,
    StepSignal,
    make_fleet,
    permute_segments,
    truncate,
)

from conftest import HOUR, KW, KWH


class TestDevice:
    def test_ttg(self):
        d = Device("d", p_max=4 * KW, energy=108 * KWH)
        assert d.ttg == 27 * HOUR

    def test_empty_device_allowed(self):
        assert Device("d", p_max=1.0, energy=0.0).ttg == 0.0

    @pytest.mark.parametrize("p_max", [0.0, -1.0, math.inf, math.nan])
    def test_bad_power(self, p_max):
        with pytest.raises(InvalidDevice):
            Device("d", p_max=p_max, energy=1.0)

    @pytest.mark.parametrize("energy", [-1.0, math.inf, math.nan])
    def test_bad_energy(self, energy):
        with pytest.raises(InvalidDevice):
            Device("d", p_max=1.0, energy=energy)

    def test_bad_id(self):
        with pytest.raises(InvalidDevice):
            Device("", p_max=1.0, energy=1.0)


class TestMakeFleet:
    def test_empty(self):
        with pytest.raises(EmptyFleet):
            make_fleet([])

    def test_groups_sorted_descending(self, fleet_a):
        assert fleet_a.q == 2
        assert fleet_a.group_ttg[0] == 27 * HOUR
        assert fleet_a.group_ttg[1] == 2 * HOUR
        assert fleet_a.group_powers[0] == 4 * KW
        assert fleet_a.group_powers[1] == 18 * KW

    def test_totals(self, fleet_a):
        assert fleet_a.total_power == 22 * KW
        assert fleet_a.total_energy == 144 * KWH
        assert fleet_a.size == 2

    def test_equal_ttg_devices_merge(self):
        # Both sustain full power for exactly 2 h.
        fleet = make_fleet(
            [
                Device("x", p_max=3 * KW, energy=6 * KWH),
                Device("y", p_max=5 * KW, energy=10 * KWH),
            ]
        )
        assert fleet.q == 1
        assert fleet.group_powers[0] == 8 * KW
        assert fleet.groups == ((0, 1),)

    def test_tolerance_widens_groups(self):
        devices = [
            Device("x", p_max=1.0, energy=100.0),
            Device("y", p_max=1.0, energy=104.0),
        ]
        assert make_fleet(devices).q == 2
        assert make_fleet(devices, tolerance=0.05).q == 1

    def test_regrouping_is_stable(self, fleet_c):
        again = make_fleet(fleet_c.devices, tolerance=fleet_c.tolerance)
        assert again.groups == fleet_c.groups
        assert np.array_equal(again.group_ttg, fleet_c.group_ttg)

    def test_arrays_are_readonly(self, fleet_a):
        with pytest.raises(ValueError):
            fleet_a.group_ttg[0] = 0.0

    def test_bad_tolerance(self):
        with pytest.raises(InvalidDevice):
            make_fleet([Device("d", 1.0, 1.0)], tolerance=-1.0)


class TestStepSignal:
    def test_constant(self):
        s = StepSignal.constant(22 * KW, 3 * HOUR)
        assert s.horizon == 3 * HOUR
        assert s.sup() == 22 * KW
        assert s.total_energy() == 66 * KWH
        assert s.value_at(0.0) == 22 * KW
        assert s.value_at(3 * HOUR) == 0.0  # right-open

    def test_zero_signal(self):
        z = StepSignal.constant(5.0, 0.0)
        assert z.horizon == 0.0
        assert z.is_zero()
        assert z.sup() == 0.0
        assert list(z.segments()) == []

    def test_from_segments_drops_zero_durations(self):
        s = StepSignal.from_segments([(1.0, 2.0), (0.0, 9.0), (1.0, 3.0)])
        assert s.values == (2.0, 3.0)
        assert s.breakpoints == (0.0, 1.0)
        assert s.horizon == 2.0

    def test_value_at_inner_boundary(self):
        s = StepSignal.from_segments([(2.0, 10.0), (2.0, 20.0)])
        assert s.value_at(2.0) == 20.0
        assert s.value_at(1.9999) == 10.0
        assert s.value_at(-0.1) == 0.0

    @pytest.mark.parametrize(
        "bp,vals,horizon",
        [
            ((0.0, 2.0), (1.0,), 3.0),  # length mismatch
            ((1.0,), (1.0,), 3.0),  # first breakpoint not 0
            ((0.0, 2.0, 2.0), (1.0, 1.0, 1.0), 3.0),  # not increasing
            ((0.0,), (1.0,), 0.0),  # breakpoint at/after horizon
            ((0.0,), (-1.0,), 1.0),  # negative value
            ((), (), 1.0),  # empty needs horizon 0
        ],
    )
    def test_invalid(self, bp, vals, horizon):
        with pytest.raises(InvalidSignal):
            StepSignal(bp, vals, horizon)


class TestTruncate:
    def test_restriction(self):
        s = StepSignal.from_segments([(2.0, 10.0), (2.0, 20.0), (2.0, 5.0)])
        t = truncate(s, 1.0, 5.0)
        assert t.horizon == 4.0
        assert t.values == (10.0, 20.0, 5.0)
        assert t.breakpoints == (0.0, 1.0, 3.0)

    def test_full_window_is_identity(self):
        s = StepSignal.from_segments([(2.0, 10.0), (3.0, 20.0)])
        assert truncate(s, 0.0, s.horizon) == s

    def test_empty_window(self):
        s = StepSignal.constant(1.0, 4.0)
        assert truncate(s, 2.0, 2.0).horizon == 0.0

    def test_bad_window(self):
        s = StepSignal.constant(1.0, 4.0)
        with pytest.raises(InvalidWindow):
            truncate(s, 3.0, 2.0)
        with pytest.raises(InvalidWindow):
            truncate(s, 0.0, 5.0)


class TestPermuteSegments:
    def test_swap_halves(self):
        s = StepSignal.from_segments([(2.0, 10.0), (2.0, 20.0)])
        p = permute_segments(s, cuts=[2.0], order=[1, 0])
        assert p.values == (20.0, 10.0)
        assert p.horizon == s.horizon
        assert p.total_energy() == s.total_energy()

    def test_identity_order(self):
        s = StepSignal.from_segments([(1.0, 3.0), (1.0, 7.0)])
        assert permute_segments(s, cuts=[1.0], order=[0, 1]) == s

    def test_cut_inside_segment(self):
        s = StepSignal.constant(5.0, 4.0)
        p = permute_segments(s, cuts=[1.0, 3.0], order=[2, 0, 1])
        assert p.horizon == 4.0
        assert p.total_energy() == s.total_energy()

    def test_bad_order(self):
        s = StepSignal.constant(5.0, 4.0)
        with pytest.raises(InvalidPartition):
            permute_segments(s, cuts=[1.0], order=[0, 0])

    def test_bad_cuts(self):
        s = StepSignal.constant(5.0, 4.0)
        with pytest.raises(InvalidPartition):
            permute_segments(s, cuts=[3.0, 1.0], order=[0, 1, 2])
        with pytest.raises(InvalidPartition):
            permute_segments(s, cuts=[9.0], order=[0, 1])
