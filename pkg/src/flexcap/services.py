"""Service sizing, fleet comparison and Monte Carlo feasibility.

Closed forms on the capacity curve answer "largest rectangular pulse of a
given duration" and "longest ramp at a given gradient"; simulation answers
"when does delivery first fail"; scenario sampling estimates the
probability that a random request is feasible.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dispatch import simulate
from .epcurve import (
    EPCurve,
    capacity_curve,
    dominates,
    ep_transform,
    find_violation,
)
from .errors import InvalidConfig, InvalidDuration, InvalidGradient
from .model import DEFAULT_RTOL, Device, FleetState, StepSignal, make_fleet

HOUR = 3600.0
KW = 1e3
MW = 1e6

# 97.5 % normal quantile for the Wilson 95 % interval
WILSON_Z = 1.959963984540054


def max_pulse(fleet: FleetState, duration: float) -> float:
    """Largest constant power (watts) sustainable for `duration` seconds.

    A pulse of magnitude M has the E-p curve d*(M-p)+, a line from
    (0, M*d) to (M, 0); it stays under the capacity curve exactly when
    M <= p_k + E_k/d at every capacity breakpoint, so the answer is the
    minimum of those bounds.
    """
    if not (isinstance(duration, (int, float)) and math.isfinite(duration) and duration > 0):
        raise InvalidDuration(f"duration must be finite and > 0 seconds, got {duration!r}")
    cap = capacity_curve(fleet)
    return min(p + e / duration for p, e in cap.breakpoints())


def _ramp_curve_values(gradient: float, T: float, at: np.ndarray) -> np.ndarray:
    """E-p transform of the ramp 0 -> g*T over [0, T]: (gT - p)^2 / 2g."""
    shortfall = np.maximum(gradient * T - at, 0.0)
    return shortfall * shortfall / (2.0 * gradient)


def _ramp_fits(cap: EPCurve, gradient: float, T: float) -> bool:
    # The difference capacity - ramp is concave on each capacity segment,
    # so checking capacity breakpoints is exact. No slack here: near the
    # p-intercept the quadratic ramp curve would turn any energy slack into
    # a sqrt-sized duration overshoot; bisection alone sets the precision.
    want = _ramp_curve_values(gradient, T, cap.p)
    return bool(np.all(cap.E >= want))


def max_ramp(fleet: FleetState, gradient: float, rtol: float = DEFAULT_RTOL) -> float:
    """Longest duration (seconds) of a ramp from 0 at `gradient` watts/second.

    Solved by bisection on the capacity curve to relative `rtol`; the
    closed form is min over breakpoints of (p_k + sqrt(2 g E_k)) / g.
    """
    if not (isinstance(gradient, (int, float)) and math.isfinite(gradient) and gradient > 0):
        raise InvalidGradient(f"gradient must be finite and > 0 W/s, got {gradient!r}")
    cap = capacity_curve(fleet)
    if cap.p_intercept == 0:
        return 0.0
    lo = 0.0
    hi = (cap.p_intercept + math.sqrt(2.0 * gradient * cap.e_intercept)) / gradient
    if _ramp_fits(cap, gradient, hi):
        return hi
    while hi - lo > rtol * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if _ramp_fits(cap, gradient, mid):
            lo = mid
        else:
            hi = mid
    return lo


def time_to_failure(fleet: FleetState, signal: StepSignal, policy: str = "op") -> float:
    """First instant the policy falls short of the request; +inf if never."""
    return simulate(fleet, signal, policy).time_to_failure


def max_feasible_truncation(fleet: FleetState, signal: StepSignal) -> float:
    """Largest t such that the signal truncated to [0, t) is feasible.

    Computed on curves, independently of any simulation: within one
    segment of value v the truncated transform grows linearly in t, and
    (capacity - accumulated)/(v - p) is monotone on each linear piece of
    the room function, so the binding threshold is a minimum over grid
    points. Agrees with the optimal policy's time to failure.
    """
    if signal.horizon == 0:
        return 0.0
    cap = capacity_curve(fleet)
    grid = np.union1d(cap.p, np.asarray(signal.values, dtype=float))
    capv = cap.evaluate(grid)
    acc = np.zeros_like(capv)
    for start, end, v in signal.segments():
        width = end - start
        mask = grid < v
        if mask.any():
            tau = np.min((capv[mask] - acc[mask]) / (v - grid[mask]))
            if tau < width:
                return start + max(float(tau), 0.0)
        acc += width * np.maximum(v - grid, 0.0)
    return signal.horizon


@dataclass(frozen=True)
class ComparisonVerdict:
    """Pairwise capacity-dominance verdict.

    relation: a_dominates | b_dominates | equivalent | incomparable.
    witness_p: a power (watts) where the losing side falls short; for
        incomparable fleets, where `a` first fails; None when equivalent.
    """

    relation: str
    witness_p: float | None


def compare_fleets(a: FleetState, b: FleetState, rtol: float = DEFAULT_RTOL) -> ComparisonVerdict:
    """Compare two fleets by capacity dominance.

    equivalent means each dominates the other within tolerance: the fleets
    accept exactly the same request signals.
    """
    ca = capacity_curve(a)
    cb = capacity_curve(b)
    a_over_b = dominates(ca, cb, rtol)
    b_over_a = dominates(cb, ca, rtol)
    if a_over_b and b_over_a:
        return ComparisonVerdict("equivalent", None)
    if a_over_b:
        return ComparisonVerdict("a_dominates", find_violation(cb, ca, rtol))
    if b_over_a:
        return ComparisonVerdict("b_dominates", find_violation(ca, cb, rtol))
    return ComparisonVerdict("incomparable", find_violation(ca, cb, rtol))


@dataclass(frozen=True)
class ScenarioConfig:
    """Random scenario family: fleet draw plus hourly request draw.

    Units are part of the schema (they mirror how such studies are
    usually quoted); generate_scenario converts to SI.

    device_count: number of devices.
    ttg_hours: (low, high) uniform time-to-go draw, hours.
    power_kw: (low, high) uniform rating draw, kW; strictly positive draws.
    request_mean_mw / request_sd_mw: normal request level per interval, MW,
        clamped at 0.
    interval_hours: request step width, hours.
    horizon_hours: total length, hours (last step may be shorter).
    seed: master seed; scenario i uses SeedSequence([seed, i]).
    """

    device_count: int
    ttg_hours: tuple[float, float]
    power_kw: tuple[float, float]
    request_mean_mw: float
    request_sd_mw: float
    interval_hours: float
    horizon_hours: float
    seed: int

    def __post_init__(self):
        if not isinstance(self.device_count, int) or self.device_count < 1:
            raise InvalidConfig(f"device_count must be an integer >= 1, got {self.device_count!r}")
        lo, hi = self.ttg_hours
        if not (math.isfinite(lo) and math.isfinite(hi) and 0 <= lo <= hi):
            raise InvalidConfig(f"ttg_hours must satisfy 0 <= low <= high, got {self.ttg_hours!r}")
        lo, hi = self.power_kw
        if not (math.isfinite(lo) and math.isfinite(hi) and 0 <= lo <= hi and hi > 0):
            raise InvalidConfig(f"power_kw must satisfy 0 <= low <= high, high > 0, got {self.power_kw!r}")
        if not math.isfinite(self.request_mean_mw):
            raise InvalidConfig(f"request_mean_mw must be finite, got {self.request_mean_mw!r}")
        if not (math.isfinite(self.request_sd_mw) and self.request_sd_mw >= 0):
            raise InvalidConfig(f"request_sd_mw must be finite and >= 0, got {self.request_sd_mw!r}")
        if not (math.isfinite(self.interval_hours) and self.interval_hours > 0):
            raise InvalidConfig(f"interval_hours must be > 0, got {self.interval_hours!r}")
        if not (math.isfinite(self.horizon_hours) and self.horizon_hours > 0):
            raise InvalidConfig(f"horizon_hours must be > 0, got {self.horizon_hours!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise InvalidConfig(f"seed must be an integer >= 0, got {self.seed!r}")


def _draw_fleet(config: ScenarioConfig, tolerance: float) -> FleetState:
    rng = np.random.default_rng(np.random.SeedSequence([config.seed]))
    n = config.device_count
    ttg = rng.uniform(config.ttg_hours[0], config.ttg_hours[1], n) * HOUR
    lo, hi = config.power_kw
    if lo == 0:
        # open interval at zero: ratings must stay positive
        p = hi * (1.0 - rng.random(n)) * KW
    else:
        p = rng.uniform(lo, hi, n) * KW
    width = len(str(n - 1))
    devices = [
        Device(f"d{i:0{width}d}", float(p[i]), float(ttg[i] * p[i])) for i in range(n)
    ]
    return make_fleet(devices, tolerance)


def _draw_signal(config: ScenarioConfig, index: int) -> StepSignal:
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, index]))
    interval = config.interval_hours * HOUR
    horizon = config.horizon_hours * HOUR
    steps = math.ceil(horizon / interval - 1e-12)
    values = np.maximum(rng.normal(config.request_mean_mw, config.request_sd_mw, steps), 0.0) * MW
    segments = []
    for k in range(steps):
        width = min(interval, horizon - k * interval)
        segments.append((width, float(values[k])))
    return StepSignal.from_segments(segments)


def generate_scenario(
    config: ScenarioConfig, index: int = 0, tolerance: float = DEFAULT_RTOL
) -> tuple[FleetState, StepSignal]:
    """One deterministic draw: the config's fleet and request trace `index`.

    The fleet depends only on the seed; the signal on (seed, index).
    """
    return _draw_fleet(config, tolerance), _draw_signal(config, index)


@dataclass(frozen=True)
class FeasibilityEstimate:
    """Monte Carlo feasibility probability with a Wilson 95 % interval."""

    samples: int
    feasible: int
    probability: float
    ci_low: float
    ci_high: float


def _wilson(feasible: int, samples: int) -> tuple[float, float]:
    z2 = WILSON_Z * WILSON_Z
    phat = feasible / samples
    denom = 1.0 + z2 / samples
    center = (phat + z2 / (2.0 * samples)) / denom
    half = WILSON_Z * math.sqrt(phat * (1.0 - phat) / samples + z2 / (4.0 * samples * samples)) / denom
    # sqrt rounding can leave a 1 ulp residue outside [0, phat] / [phat, 1]
    return min(max(center - half, 0.0), phat), max(min(center + half, 1.0), phat)


def _count_feasible(payload) -> int:
    p, E, rtol, config, start, stop = payload
    cap = EPCurve(np.array(p), np.array(E))
    count = 0
    for i in range(start, stop):
        request = ep_transform(_draw_signal(config, i))
        if dominates(cap, request, rtol):
            count += 1
    return count


def feasibility_probability(
    fleet: FleetState,
    config: ScenarioConfig,
    samples: int,
    workers: int | None = None,
    rtol: float = DEFAULT_RTOL,
) -> FeasibilityEstimate:
    """Probability that a random request trace is feasible for the fleet.

    Scenario i draws its trace from SeedSequence([config.seed, i]), so the
    count depends only on (config, samples) -- never on the worker split.
    """
    if not isinstance(samples, int) or samples < 1:
        raise InvalidConfig(f"samples must be an integer >= 1, got {samples!r}")
    if workers is not None and (not isinstance(workers, int) or workers < 1):
        raise InvalidConfig(f"workers must be an integer >= 1, got {workers!r}")
    cap = capacity_curve(fleet)
    payload = (cap.p.tolist(), cap.E.tolist(), rtol, config)

    if workers is None or workers == 1 or samples == 1:
        feasible = _count_feasible((*payload, 0, samples))
    else:
        bounds = np.linspace(0, samples, min(workers, samples) + 1, dtype=int)
        chunks = [(*payload, int(a), int(b)) for a, b in zip(bounds, bounds[1:])]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            feasible = sum(pool.map(_count_feasible, chunks))

    lo, hi = _wilson(feasible, samples)
    return FeasibilityEstimate(samples, feasible, feasible / samples, lo, hi)
