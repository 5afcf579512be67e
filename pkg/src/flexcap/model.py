"""Core fleet and signal model.

All quantities are SI internally: watts, joules, seconds. A device is a
discharge-only store described by a power rating and remaining energy; its
time-to-go ``energy / p_max`` is the longest it can sustain full power.
Fleets are kept grouped by time-to-go (descending) because every dispatch
rule here treats equal-ttg devices as one unit.

Step signals are right-open piecewise-constant power requests on
``[0, horizon)`` and identically zero afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    EmptyFleet,
    InvalidDevice,
    InvalidPartition,
    InvalidSignal,
    InvalidWindow,
)

# Default relative tolerance for grouping and curve dominance. The CLI layer
# lets FLEXCAP_TOLERANCE override it.
DEFAULT_RTOL = 1e-9


def _readonly(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Device:
    """One discharge-only store.

    id: opaque label, kept through snapshots and file round-trips.
    p_max: maximum discharge power in watts, > 0.
    energy: remaining extractable energy in joules, >= 0.
    """

    id: str
    p_max: float
    energy: float

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise InvalidDevice(f"device id must be a non-empty string, got {self.id!r}")
        if not (math.isfinite(self.p_max) and self.p_max > 0):
            raise InvalidDevice(f"device {self.id}: p_max must be finite and > 0, got {self.p_max}")
        if not (math.isfinite(self.energy) and self.energy >= 0):
            raise InvalidDevice(f"device {self.id}: energy must be finite and >= 0, got {self.energy}")

    @property
    def ttg(self) -> float:
        """Time-to-go in seconds: how long the device sustains p_max."""
        return self.energy / self.p_max


@dataclass(frozen=True, eq=False)
class FleetState:
    """A fleet snapshot, grouped by time-to-go.

    devices: the fleet in caller order.
    groups: partition of device indices; groups are sorted by descending
        time-to-go and each group lists member indices ascending.
    group_ttg: per-group time-to-go in seconds (the largest member's value;
        members agree with it to within the grouping tolerance).
    group_powers: per-group sum of p_max in watts.
    tolerance: relative grouping tolerance used to build this state.

    Construct through make_fleet; instances are immutable.
    """

    devices: tuple[Device, ...]
    groups: tuple[tuple[int, ...], ...]
    group_ttg: np.ndarray
    group_powers: np.ndarray
    tolerance: float = DEFAULT_RTOL

    @property
    def q(self) -> int:
        """Number of groups."""
        return len(self.groups)

    @property
    def size(self) -> int:
        return len(self.devices)

    @property
    def total_power(self) -> float:
        """Sum of ratings in watts, counting empty devices."""
        return float(sum(d.p_max for d in self.devices))

    @property
    def total_energy(self) -> float:
        """Sum of remaining energies in joules."""
        return float(sum(d.energy for d in self.devices))

    def device_powers(self) -> np.ndarray:
        return np.array([d.p_max for d in self.devices], dtype=np.float64)

    def device_energies(self) -> np.ndarray:
        return np.array([d.energy for d in self.devices], dtype=np.float64)


def make_fleet(devices: Sequence[Device], tolerance: float = DEFAULT_RTOL) -> FleetState:
    """Group devices by time-to-go and return the fleet state.

    Devices are ordered by descending ttg (ties by input position); a device
    joins the current group when |ttg - anchor| <= tolerance * max(1, anchor)
    where anchor is the group's first (largest) ttg. Regrouping a fleet's own
    devices reproduces the same partition.
    """
    if not (math.isfinite(tolerance) and tolerance >= 0):
        raise InvalidDevice(f"grouping tolerance must be finite and >= 0, got {tolerance}")
    devices = tuple(devices)
    if not devices:
        raise EmptyFleet("make_fleet requires at least one device")

    order = sorted(range(len(devices)), key=lambda i: (-devices[i].ttg, i))
    groups: list[list[int]] = []
    anchors: list[float] = []
    powers: list[float] = []
    for i in order:
        ttg = devices[i].ttg
        if groups and anchors[-1] - ttg <= tolerance * max(1.0, anchors[-1]):
            groups[-1].append(i)
            powers[-1] += devices[i].p_max
        else:
            groups.append([i])
            anchors.append(ttg)
            powers.append(devices[i].p_max)

    return FleetState(
        devices=devices,
        groups=tuple(tuple(g) for g in groups),
        group_ttg=_readonly(anchors),
        group_powers=_readonly(powers),
        tolerance=float(tolerance),
    )


@dataclass(frozen=True, eq=False)
class DispatchResult:
    """Instantaneous allocation for one request.

    allocation: watts per device, caller order; 0 for empty devices.
    total: watts delivered, min(request, available power).
    deficit: watts short, max(request - available, 0).
    """

    allocation: np.ndarray
    total: float
    deficit: float


@dataclass(frozen=True)
class StepSignal:
    """Piecewise-constant power request on [0, horizon).

    breakpoints: segment start times, strictly increasing, first one 0.
    values: power per segment in watts, >= 0; len(values) == len(breakpoints)
        and the last segment ends at the horizon.
    horizon: end time in seconds. The empty signal (no segments, horizon 0)
        is the canonical zero signal.
    """

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]
    horizon: float

    def __post_init__(self):
        bp, vals = self.breakpoints, self.values
        if len(bp) != len(vals):
            raise InvalidSignal(f"{len(bp)} breakpoints but {len(vals)} values")
        if not math.isfinite(self.horizon) or self.horizon < 0:
            raise InvalidSignal(f"horizon must be finite and >= 0, got {self.horizon}")
        if not bp:
            if self.horizon != 0:
                raise InvalidSignal("a signal with no segments must have horizon 0")
            return
        if bp[0] != 0:
            raise InvalidSignal(f"first breakpoint must be 0, got {bp[0]}")
        for a, b in zip(bp, bp[1:]):
            if not (math.isfinite(b) and b > a):
                raise InvalidSignal(f"breakpoints must be strictly increasing, got {a} then {b}")
        if bp[-1] >= self.horizon:
            raise InvalidSignal(
                f"last breakpoint {bp[-1]} must lie before the horizon {self.horizon}"
            )
        for v in vals:
            if not (math.isfinite(v) and v >= 0):
                raise InvalidSignal(f"values must be finite and >= 0, got {v}")

    @classmethod
    def from_segments(cls, segments: Sequence[tuple[float, float]]) -> "StepSignal":
        """Build from (duration, value) pairs; zero-duration pairs are dropped."""
        bp: list[float] = []
        vals: list[float] = []
        t = 0.0
        for duration, value in segments:
            if duration < 0:
                raise InvalidSignal(f"segment duration must be >= 0, got {duration}")
            if duration == 0:
                continue
            bp.append(t)
            vals.append(value)
            t += duration
        return cls(tuple(bp), tuple(vals), t)

    @classmethod
    def constant(cls, value: float, duration: float) -> "StepSignal":
        """A single-segment signal: `value` watts for `duration` seconds."""
        if duration == 0:
            return cls((), (), 0.0)
        return cls((0.0,), (float(value),), float(duration))

    def segments(self) -> Iterator[tuple[float, float, float]]:
        """Yield (start, end, value) per segment."""
        for k, start in enumerate(self.breakpoints):
            end = self.breakpoints[k + 1] if k + 1 < len(self.breakpoints) else self.horizon
            yield start, end, self.values[k]

    def value_at(self, t: float) -> float:
        """Signal value at time t; 0 outside [0, horizon)."""
        if t < 0 or t >= self.horizon:
            return 0.0
        # rightmost segment starting at or before t
        idx = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return self.values[idx] if idx >= 0 else 0.0

    def total_energy(self) -> float:
        """Integral of the signal in joules."""
        return float(sum((end - start) * v for start, end, v in self.segments()))

    def sup(self) -> float:
        """Largest requested power in watts (0 for the zero signal)."""
        return max(self.values, default=0.0)

    def is_zero(self) -> bool:
        return all(v == 0 for v in self.values)


def _slice_segments(signal: StepSignal, t0: float, t1: float) -> list[tuple[float, float]]:
    """(duration, value) pieces of `signal` restricted to [t0, t1)."""
    pieces: list[tuple[float, float]] = []
    for start, end, v in signal.segments():
        lo = max(start, t0)
        hi = min(end, t1)
        if hi > lo:
            pieces.append((hi - lo, v))
    return pieces


def truncate(signal: StepSignal, t0: float, t1: float) -> StepSignal:
    """Restriction of the signal to [t0, t1), re-anchored to start at 0.

    The result has horizon t1 - t0 and equals signal(t + t0) on it. Requires
    0 <= t0 <= t1 <= horizon.
    """
    if not (math.isfinite(t0) and math.isfinite(t1)):
        raise InvalidWindow(f"window bounds must be finite, got [{t0}, {t1})")
    if not (0 <= t0 <= t1 <= signal.horizon):
        raise InvalidWindow(
            f"window [{t0}, {t1}) must satisfy 0 <= t0 <= t1 <= horizon ({signal.horizon})"
        )
    return StepSignal.from_segments(_slice_segments(signal, t0, t1))


def permute_segments(
    signal: StepSignal, cuts: Sequence[float], order: Sequence[int]
) -> StepSignal:
    """Cut the signal at the given times and concatenate the parts in `order`.

    cuts: strictly increasing times within [0, horizon]; they split the
        timeline into len(cuts) + 1 parts.
    order: a permutation of range(len(cuts) + 1), 0-based.

    The result spans the same total duration and carries the same energy; it
    is exact when all times are integers (float sums of sliced durations may
    otherwise drift by rounding).
    """
    cuts = [float(c) for c in cuts]
    for c in cuts:
        if not (math.isfinite(c) and 0 <= c <= signal.horizon):
            raise InvalidPartition(f"cut time {c} outside [0, {signal.horizon}]")
    for a, b in zip(cuts, cuts[1:]):
        if b <= a:
            raise InvalidPartition(f"cut times must be strictly increasing, got {a} then {b}")

    parts = len(cuts) + 1
    order = [int(i) for i in order]
    if sorted(order) != list(range(parts)):
        raise InvalidPartition(
            f"order must be a permutation of 0..{parts - 1}, got {order}"
        )

    bounds = [0.0, *cuts, signal.horizon]
    pieces: list[tuple[float, float]] = []
    for j in order:
        pieces.extend(_slice_segments(signal, bounds[j], bounds[j + 1]))
    return StepSignal.from_segments(pieces)
