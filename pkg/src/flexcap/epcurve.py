"""Energy-above-power curves and feasibility by curve dominance.

The E-p transform of a power signal maps a threshold p to the energy the
signal requests above p: E(p) = integral of max(signal - p, 0). For step
signals this is convex, nonincreasing and piecewise linear, pinned at
E(0) = total energy and reaching 0 at the signal's peak power.

A fleet's capacity curve is the transform of its worst-case reference
(every store discharging flat out until empty). A request is feasible for
the fleet exactly when the capacity curve dominates the request's curve
everywhere; with both curves piecewise linear the comparison only needs
the union of their breakpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidClusterCount, InvalidDevice
from .model import DEFAULT_RTOL, FleetState, StepSignal


@dataclass(frozen=True, eq=False)
class EPCurve:
    """Piecewise-linear energy-above-power curve.

    p: breakpoint powers in watts, strictly increasing, p[0] == 0.
    E: energies in joules at those powers, nonincreasing, E[-1] == 0.
    """

    p: np.ndarray
    E: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        E = np.asarray(self.E, dtype=np.float64)
        if p.ndim != 1 or p.shape != E.shape or len(p) == 0:
            raise ValueError("curve needs matching 1-d p and E arrays")
        if p[0] != 0 or np.any(np.diff(p) <= 0):
            raise ValueError("p must be strictly increasing from 0")
        if E[-1] != 0 or np.any(np.diff(E) > 0):
            raise ValueError("E must be nonincreasing and end at 0")
        p.flags.writeable = False
        E.flags.writeable = False
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "E", E)

    @property
    def e_intercept(self) -> float:
        """E(0): total energy above zero power, in joules."""
        return float(self.E[0])

    @property
    def p_intercept(self) -> float:
        """Smallest power at which the curve reaches 0 (the deliverable peak)."""
        return float(self.p[np.nonzero(self.E == 0)[0][0]])

    def evaluate(self, at) -> np.ndarray | float:
        """Linear interpolation; 0 beyond the last breakpoint."""
        out = np.interp(at, self.p, self.E)
        return float(out) if np.isscalar(at) else out

    def area(self) -> float:
        """Integral of E over p (joule-watts); used for the flexibility gap."""
        return float(np.trapezoid(self.E, self.p))

    def breakpoints(self) -> list[tuple[float, float]]:
        return [(float(a), float(b)) for a, b in zip(self.p, self.E)]

    def is_nonincreasing(self) -> bool:
        """Exact check that stored E values never rise."""
        return bool(np.all(np.diff(self.E) <= 0.0))

    def is_convex(self) -> bool:
        """Exact slope-monotonicity check of the stored breakpoints.

        Compared in rational arithmetic so no rounding enters the check
        itself: slope_j <= slope_{j+1} via cross-multiplication.
        """
        p = [Fraction(float(x)) for x in self.p]
        E = [Fraction(float(y)) for y in self.E]
        for j in range(len(p) - 2):
            lhs = (E[j + 1] - E[j]) * (p[j + 2] - p[j + 1])
            rhs = (E[j + 2] - E[j + 1]) * (p[j + 1] - p[j])
            if lhs > rhs:
                return False
        return True


ZERO_CURVE_GRID = (0.0,)


def _curve_from_measures(values: list[float], measures: list[float]) -> EPCurve:
    """Build the curve from distinct positive values and their durations.

    E is accumulated backward from the peak so monotonicity is exact:
    each step adds suffix_measure * (p_next - p), a nonnegative float.
    """
    order = sorted(range(len(values)), key=lambda k: values[k])
    v = [values[k] for k in order]
    tau = [measures[k] for k in order]
    m = len(v)

    grid = [0.0] + v
    suffix = [0.0] * m
    acc = 0.0
    for k in range(m - 1, -1, -1):
        acc += tau[k]
        suffix[k] = acc

    E = [0.0] * (m + 1)
    for j in range(m - 1, -1, -1):
        E[j] = E[j + 1] + suffix[j] * (grid[j + 1] - grid[j])
    return EPCurve(np.array(grid), np.array(E))


def ep_transform(signal: StepSignal) -> EPCurve:
    """E-p transform of a step signal.

    Equal values accumulate their durations; the zero signal maps to the
    single-point zero curve.
    """
    durations: dict[float, float] = {}
    for start, end, v in signal.segments():
        if v > 0:
            durations[v] = durations.get(v, 0.0) + (end - start)
    if not durations:
        return EPCurve(np.array(ZERO_CURVE_GRID), np.array([0.0]))
    values = list(durations.keys())
    return _curve_from_measures(values, [durations[v] for v in values])


def _staircase(pairs: list[tuple[float, float]]) -> StepSignal:
    """Worst-case discharge profile from (time-to-go, power) pairs.

    Each pair contributes its power on [0, ttg); the result is the
    nonincreasing staircase of suffix power sums.
    """
    pairs = sorted((t, w) for t, w in pairs if t > 0 and w > 0)
    if not pairs:
        return StepSignal((), (), 0.0)
    # distinct expiry times ascending, suffix sums of powers still active
    times: list[float] = []
    powers: list[float] = []
    for t, w in pairs:
        if times and t == times[-1]:
            powers[-1] += w
        else:
            times.append(t)
            powers.append(w)
    suffix = [0.0] * len(powers)
    acc = 0.0
    for k in range(len(powers) - 1, -1, -1):
        acc += powers[k]
        suffix[k] = acc
    breakpoints = [0.0] + times[:-1]
    return StepSignal(tuple(breakpoints), tuple(suffix), times[-1])


def worst_case_reference(fleet: FleetState) -> StepSignal:
    """The fleet flat out: every store at full power until empty.

    Grouped by time-to-go; empty devices contribute nothing. An all-empty
    fleet yields the zero signal.
    """
    pairs = []
    for g, members in enumerate(fleet.groups):
        w = sum(fleet.devices[i].p_max for i in members if fleet.devices[i].energy > 0)
        pairs.append((float(fleet.group_ttg[g]), w))
    return _staircase(pairs)


def capacity_curve(fleet: FleetState) -> EPCurve:
    """E-p transform of the fleet's worst-case reference."""
    return ep_transform(worst_case_reference(fleet))


def max_flexibility_line(e_total: float, p_total: float) -> EPCurve:
    """The unconstrained upper bound: straight line from (0, E) to (P, 0).

    No fleet with total energy E and total rating P can exceed it.
    """
    if not (math.isfinite(p_total) and p_total > 0):
        raise InvalidDevice(f"total power must be finite and > 0, got {p_total}")
    if not (math.isfinite(e_total) and e_total >= 0):
        raise InvalidDevice(f"total energy must be finite and >= 0, got {e_total}")
    return EPCurve(np.array([0.0, p_total]), np.array([e_total, 0.0]))


def dominates(a: EPCurve, b: EPCurve, rtol: float = DEFAULT_RTOL) -> bool:
    """True when a >= b everywhere, within rtol * max(1, b(0)) slack.

    Both curves are piecewise linear, so checking the union of their
    breakpoints is exact.
    """
    grid = np.union1d(a.p, b.p)
    slack = rtol * max(1.0, b.e_intercept)
    return bool(np.all(a.evaluate(grid) >= b.evaluate(grid) - slack))


def find_violation(a: EPCurve, b: EPCurve, rtol: float = DEFAULT_RTOL):
    """Largest breakpoint power at which a fails to dominate b, or None.

    Reporting the top of the violating range names the structural limit
    first: a request whose peak exceeds the fleet's is witnessed at the
    fleet's peak power, a pure energy shortfall at 0.
    """
    grid = np.union1d(a.p, b.p)
    slack = rtol * max(1.0, b.e_intercept)
    bad = np.nonzero(a.evaluate(grid) < b.evaluate(grid) - slack)[0]
    return float(grid[bad[-1]]) if len(bad) else None


def dominance_margin(a: EPCurve, b: EPCurve) -> float:
    """min over union breakpoints of a - b (signed, joules)."""
    grid = np.union1d(a.p, b.p)
    return float(np.min(a.evaluate(grid) - b.evaluate(grid)))


def is_feasible(signal: StepSignal, fleet: FleetState, rtol: float = DEFAULT_RTOL) -> bool:
    """Can the fleet deliver the signal? Capacity dominance decides exactly."""
    return dominates(capacity_curve(fleet), ep_transform(signal), rtol)


def flexibility_gap(fleet: FleetState) -> float:
    """Area between the max-flexibility line and the capacity curve (J*W).

    Zero exactly for single-device fleets; positive otherwise.
    """
    e_total = fleet.total_energy
    p_total = fleet.total_power
    if e_total == 0:
        return 0.0
    line = max_flexibility_line(e_total, p_total)
    return line.area() - capacity_curve(fleet).area()


def clustered_capacity_lower_bound(fleet: FleetState, k: int) -> EPCurve:
    """Capacity of the fleet coarsened to k time-to-go bands.

    Groups (descending ttg) are split into k contiguous bands of nearly
    equal count; each band is collapsed to its smallest ttg, so the result
    is dominated by the true capacity for every k and equals it at k = q.
    """
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool) or k < 1:
        raise InvalidClusterCount(f"cluster count must be an integer >= 1, got {k!r}")
    k = min(int(k), fleet.q)
    pairs = []
    for band in np.array_split(np.arange(fleet.q), k):
        ttg = float(fleet.group_ttg[band[-1]])  # smallest in the band
        w = 0.0
        for g in band:
            w += sum(
                fleet.devices[i].p_max
                for i in fleet.groups[g]
                if fleet.devices[i].energy > 0
            )
        pairs.append((ttg, w))
    signal = _staircase(pairs)
    return ep_transform(signal)
