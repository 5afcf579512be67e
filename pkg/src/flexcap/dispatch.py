"""Dispatch policies and the exact event-driven simulator.

Three rules allocate a power request across a fleet:

- op: groups in descending time-to-go run at full power, at most one
  marginal group runs fractionally, split proportionally to ratings so
  equal time-to-go stays equal. This is the rule that never fails on a
  feasible signal.
- lpf: least rated power first; each nonempty device takes
  min(p_max, remaining), ties broken by device id.
- pop: every nonempty device runs at the common fraction
  min(1, request / available).

simulate() integrates a step signal exactly: event times (segment
boundaries, group merges, depletions) are closed-form, and the state at
every event is reconstructed per device.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import InvalidRequest
from .model import Device, DispatchResult, FleetState, StepSignal, make_fleet

POLICIES = ("op", "lpf", "pop")


def _check_request(request: float) -> float:
    if not (isinstance(request, (int, float)) and math.isfinite(request) and request >= 0):
        raise InvalidRequest(f"request must be finite and >= 0 watts, got {request!r}")
    return float(request)


def _normalize_policy(policy: str) -> str:
    name = str(policy).strip().lower()
    if name not in POLICIES:
        raise ValueError(f"policy must be one of {POLICIES}, got {policy!r}")
    return name


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _effective_group_powers(fleet: FleetState) -> list[float]:
    """Per-group sum of ratings over members that still hold energy."""
    powers = []
    for members in fleet.groups:
        w = 0.0
        for idx in members:
            if fleet.devices[idx].energy > 0:
                w += fleet.devices[idx].p_max
        powers.append(w)
    return powers


def max_available_power(fleet: FleetState) -> float:
    """Total power the fleet can deliver right now, in watts."""
    return float(sum(d.p_max for d in fleet.devices if d.energy > 0))


def optimal_dispatch(fleet: FleetState, request: float) -> DispatchResult:
    """Allocate `request` watts by descending time-to-go.

    Full groups first; the marginal group splits its share proportionally
    to member ratings. Empty devices get exactly 0.
    """
    request = _check_request(request)
    n = fleet.size
    alloc = np.zeros(n)
    eff = _effective_group_powers(fleet)

    avail = 0.0
    for g in range(fleet.q):
        if fleet.group_ttg[g] > 0:
            avail += eff[g]

    acc = 0.0
    for g in range(fleet.q):
        if fleet.group_ttg[g] <= 0 or eff[g] == 0.0:
            continue
        if acc + eff[g] <= request:
            r = 1.0
            acc += eff[g]
        elif acc < request:
            r = (request - acc) / eff[g]
            acc = request
        else:
            break
        for idx in fleet.groups[g]:
            if fleet.devices[idx].energy > 0:
                alloc[idx] = r * fleet.devices[idx].p_max

    deficit = request - avail if request > avail else 0.0
    total = avail if deficit > 0.0 else request
    return DispatchResult(_readonly(alloc), total, deficit)


def _lpf_order(fleet: FleetState) -> list[int]:
    return sorted(
        range(fleet.size),
        key=lambda i: (fleet.devices[i].p_max, fleet.devices[i].id, i),
    )


def lpf_dispatch(fleet: FleetState, request: float) -> DispatchResult:
    """Fill devices in ascending rating order (ties by id)."""
    request = _check_request(request)
    alloc = np.zeros(fleet.size)
    remaining = request
    for i in _lpf_order(fleet):
        d = fleet.devices[i]
        if d.energy > 0 and remaining > 0.0:
            take = d.p_max if d.p_max <= remaining else remaining
            alloc[i] = take
            remaining -= take
    deficit = remaining if remaining > 0.0 else 0.0
    return DispatchResult(_readonly(alloc), request - deficit, deficit)


def pop_dispatch(fleet: FleetState, request: float) -> DispatchResult:
    """Run every nonempty device at the common fraction min(1, request/available)."""
    request = _check_request(request)
    alloc = np.zeros(fleet.size)
    avail = max_available_power(fleet)
    if avail <= 0.0:
        deficit = request
        total = 0.0
    elif request >= avail:
        for i, d in enumerate(fleet.devices):
            if d.energy > 0:
                alloc[i] = d.p_max
        deficit = request - avail
        total = avail
    else:
        f = request / avail
        for i, d in enumerate(fleet.devices):
            if d.energy > 0:
                alloc[i] = f * d.p_max
        deficit = 0.0
        total = request
    return DispatchResult(_readonly(alloc), total, deficit)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Exact simulation record.

    event_times: increasing, event_times[0] == 0, last one the horizon.
    states: fleet snapshot at each event time (states[0] is the input).
    allocations: one DispatchResult per inter-event interval.
    delivered/deficits: watts per inter-event interval.
    time_to_failure: first instant with positive deficit, +inf if none.
    """

    policy: str
    event_times: tuple[float, ...]
    states: tuple[FleetState, ...]
    allocations: tuple[DispatchResult, ...]
    delivered: np.ndarray
    deficits: np.ndarray
    time_to_failure: float

    @property
    def horizon(self) -> float:
        return self.event_times[-1]

    def delivered_energy(self) -> float:
        """Joules actually delivered over the whole horizon."""
        total = 0.0
        for j, watts in enumerate(self.delivered):
            total += watts * (self.event_times[j + 1] - self.event_times[j])
        return total

    def final_state(self) -> FleetState:
        return self.states[-1]


def _op_trajectory(fleet, signal, halt_on_failure):
    devices = fleet.devices
    eff = _effective_group_powers(fleet)
    kept = [g for g in range(fleet.q) if fleet.group_ttg[g] > 0 and eff[g] > 0.0]
    x0 = [float(fleet.group_ttg[g]) for g in kept]
    w0 = [eff[g] for g in kept]
    res = _backend.op_simulate(
        x0, w0, list(signal.breakpoints), list(signal.values), signal.horizon,
        halt_on_failure, True,
    )

    nonempty = [d.energy > 0 for d in devices]

    def snapshot(row):
        # row: time-to-go per kept group; merged runs share one float
        values = []
        member_runs = []
        for kg, g in enumerate(kept):
            values.append(row[kg])
            member_runs.append(list(fleet.groups[g]))
        for g in range(fleet.q):
            if g not in kept:
                values.append(0.0)
                member_runs.append(list(fleet.groups[g]))
        # merge adjacent equal time-to-go (exact: contacts are assigned)
        new_devices = list(devices)
        groups = []
        ttgs = []
        powers = []
        for val, members in zip(values, member_runs):
            for idx in members:
                d = devices[idx]
                energy = val * d.p_max if nonempty[idx] else 0.0
                new_devices[idx] = Device(d.id, d.p_max, energy)
            if groups and val == ttgs[-1]:
                groups[-1] = sorted(groups[-1] + members)
                powers[-1] += sum(devices[i].p_max for i in members)
            else:
                groups.append(sorted(members))
                ttgs.append(val)
                powers.append(sum(devices[i].p_max for i in members))
        arr_t = np.array(ttgs)
        arr_w = np.array(powers)
        arr_t.flags.writeable = False
        arr_w.flags.writeable = False
        return FleetState(
            devices=tuple(new_devices),
            groups=tuple(tuple(g) for g in groups),
            group_ttg=arr_t,
            group_powers=arr_w,
            tolerance=fleet.tolerance,
        )

    states = [fleet]
    for row in res["snaps"][1:]:
        states.append(snapshot(row))

    allocations = []
    for j, rate_row in enumerate(res["rates"]):
        alloc = np.zeros(fleet.size)
        for kg, g in enumerate(kept):
            r = rate_row[kg]
            if r > 0.0:
                for idx in fleet.groups[g]:
                    if nonempty[idx]:
                        alloc[idx] = r * devices[idx].p_max
        allocations.append(
            DispatchResult(_readonly(alloc), res["delivered"][j], res["deficit"][j])
        )
    return res, states, allocations


def _device_trajectory(fleet, signal, policy, halt_on_failure):
    e0 = [d.energy for d in fleet.devices]
    pmax = [d.p_max for d in fleet.devices]
    if policy == "lpf":
        res = _backend.lpf_simulate(
            e0, pmax, _lpf_order(fleet),
            list(signal.breakpoints), list(signal.values), signal.horizon,
            halt_on_failure, True,
        )
    else:
        res = _backend.pop_simulate(
            e0, pmax, list(signal.breakpoints), list(signal.values), signal.horizon,
            halt_on_failure, True,
        )

    states = [fleet]
    for row in res["snaps"][1:]:
        devs = [Device(d.id, d.p_max, row[i]) for i, d in enumerate(fleet.devices)]
        states.append(make_fleet(devs, fleet.tolerance))

    allocations = []
    for j, u_row in enumerate(res["rates"]):
        allocations.append(
            DispatchResult(
                _readonly(np.array(u_row)), res["delivered"][j], res["deficit"][j]
            )
        )
    return res, states, allocations


def simulate(
    fleet: FleetState,
    signal: StepSignal,
    policy: str = "op",
    halt_on_failure: bool = False,
) -> Trajectory:
    """Run the fleet against a step signal under one dispatch rule.

    Event times are exact (closed-form merges and depletions, segment
    boundaries assigned, never accumulated). By default delivery continues
    best-effort after the first deficit; halt_on_failure freezes the fleet
    from that instant instead.
    """
    policy = _normalize_policy(policy)
    if signal.horizon == 0:
        return Trajectory(
            policy=policy,
            event_times=(0.0,),
            states=(fleet,),
            allocations=(),
            delivered=_readonly(np.zeros(0)),
            deficits=_readonly(np.zeros(0)),
            time_to_failure=math.inf,
        )

    if policy == "op":
        res, states, allocations = _op_trajectory(fleet, signal, halt_on_failure)
    else:
        res, states, allocations = _device_trajectory(fleet, signal, policy, halt_on_failure)

    return Trajectory(
        policy=policy,
        event_times=tuple(res["times"]),
        states=tuple(states),
        allocations=tuple(allocations),
        delivered=_readonly(np.array(res["delivered"])),
        deficits=_readonly(np.array(res["deficit"])),
        time_to_failure=res["ttf"],
    )
