"""Command-line interface.

Exit codes: 0 success (or positive verdict), 1 negative verdict
(infeasible request, simulation with a failure), 2 usage or input errors.

Scalar arguments accept a unit suffix ("5h", "900s", "22kW", "2kW/h");
without one the documented default unit applies.  The environment
variable FLEXCAP_TOLERANCE overrides the default relative tolerance 1e-9
used for curve dominance and service sizing.
"""

from __future__ import annotations

import argparse
import math
import os
import re
import sys

from . import io as fio
from .dispatch import simulate
from .epcurve import (
    capacity_curve,
    clustered_capacity_lower_bound,
    dominates,
    ep_transform,
    find_violation,
    flexibility_gap,
    max_flexibility_line,
)
from .errors import FlexcapError
from .model import DEFAULT_RTOL
from .services import (
    ScenarioConfig,
    compare_fleets,
    feasibility_probability,
    max_feasible_truncation,
    max_pulse,
    max_ramp,
)

_QUANTITY_RE = re.compile(r"^\s*([-+0-9.eE]+)\s*([A-Za-z]*(?:/[A-Za-z]+)?)\s*$")


def _parse_quantity(text: str, table: dict[str, float], default_unit: str, kind: str) -> float:
    m = _QUANTITY_RE.match(text)
    if m is None:
        raise ValueError(f"cannot parse {kind} {text!r}")
    try:
        value = float(m.group(1))
    except ValueError:
        raise ValueError(f"cannot parse {kind} {text!r}") from None
    _, factor = fio._unit_factor(m.group(2) or default_unit, table, kind)
    return value * factor


def _parse_duration(text: str) -> float:
    """'5h', '900s', '30min', or a bare number in hours; returns seconds."""
    return _parse_quantity(text, fio.TIME_UNITS, "h", "duration")


def _parse_power(text: str) -> float:
    """'22kW', '0.5MW', or a bare number in kW; returns watts."""
    return _parse_quantity(text, fio.POWER_UNITS, "kW", "power")


def _parse_gradient(text: str) -> float:
    """'2kW/h', '3W/s', or a bare number in kW/h; returns watts/second."""
    m = _QUANTITY_RE.match(text)
    if m is None:
        raise ValueError(f"cannot parse gradient {text!r}")
    try:
        value = float(m.group(1))
    except ValueError:
        raise ValueError(f"cannot parse gradient {text!r}") from None
    unit = m.group(2) or "kW/h"
    if "/" not in unit:
        raise ValueError(f"gradient unit must be <power>/<time>, got {unit!r}")
    p_name, t_name = unit.split("/", 1)
    _, p_fac = fio._unit_factor(p_name, fio.POWER_UNITS, "power")
    _, t_fac = fio._unit_factor(t_name, fio.TIME_UNITS, "time")
    return value * p_fac / t_fac


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _tolerance_from_env() -> float:
    raw = os.environ.get("FLEXCAP_TOLERANCE")
    if raw is None:
        return DEFAULT_RTOL
    try:
        rtol = float(raw)
    except ValueError:
        raise FlexcapError(f"FLEXCAP_TOLERANCE must be a number, got {raw!r}") from None
    if not (math.isfinite(rtol) and rtol > 0):
        raise FlexcapError(f"FLEXCAP_TOLERANCE must be finite and > 0, got {raw}")
    return rtol


def _unit_args(sub: argparse.ArgumentParser, power: bool = False, energy: bool = False,
               time: bool = False) -> None:
    if power:
        sub.add_argument("--power-unit", default="kW", choices=sorted(fio.POWER_UNITS),
                         help="unit for printed/exported power (default kW)")
    if energy:
        sub.add_argument("--energy-unit", default="kWh", choices=sorted(fio.ENERGY_UNITS),
                         help="unit for printed/exported energy (default kWh)")
    if time:
        sub.add_argument("--time-unit", default="h", choices=sorted(fio.TIME_UNITS),
                         help="unit for printed/exported times (default h)")


def _render_curves(path: str, curves, labels, power_unit: str, energy_unit: str) -> None:
    # Cosmetic output; matplotlib stays optional so import lazily.
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    p_fac = fio.POWER_UNITS[power_unit]
    e_fac = fio.ENERGY_UNITS[energy_unit]
    fig, ax = plt.subplots(figsize=(6, 4))
    for curve, label in zip(curves, labels):
        ax.plot(curve.p / p_fac, curve.E / e_fac, marker="o", label=label)
    ax.set_xlabel(f"power threshold p [{power_unit}]")
    ax.set_ylabel(f"energy above p [{energy_unit}]")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def cmd_capacity(args: argparse.Namespace, rtol: float) -> int:
    fleet = fio.read_fleet(args.fleet, tolerance=rtol)
    if args.clusters is None:
        curve = capacity_curve(fleet)
    else:
        curve = clustered_capacity_lower_bound(fleet, args.clusters)
    p_fac = fio.POWER_UNITS[args.power_unit]
    e_fac = fio.ENERGY_UNITS[args.energy_unit]
    pts = ", ".join(f"({_fmt(p / p_fac)}, {_fmt(e / e_fac)})" for p, e in zip(curve.p, curve.E))
    print(f"E(0) = {_fmt(curve.e_intercept / e_fac)} {args.energy_unit}")
    print(f"peak power = {_fmt(curve.p_intercept / p_fac)} {args.power_unit}")
    gap = flexibility_gap(fleet)
    print(f"flexibility gap = {_fmt(gap / (e_fac * p_fac))} "
          f"{args.energy_unit}*{args.power_unit}")
    print(f"breakpoints (p {args.power_unit}, E {args.energy_unit}): {pts}")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fio.write_curve(fh, curve, args.power_unit, args.energy_unit)
    if args.svg:
        line = max_flexibility_line(fleet.total_energy, fleet.total_power)
        _render_curves(args.svg, [curve, line], ["capacity", "single-store chord"],
                       args.power_unit, args.energy_unit)
    return 0


def cmd_feasible(args: argparse.Namespace, rtol: float) -> int:
    fleet = fio.read_fleet(args.fleet, tolerance=rtol)
    signal = fio.read_signal(args.signal)
    cap = capacity_curve(fleet)
    req = ep_transform(signal)
    p_fac = fio.POWER_UNITS[args.power_unit]
    if args.svg:
        _render_curves(args.svg, [cap, req], ["capacity", "request"],
                       args.power_unit, "kWh")
    if dominates(cap, req, rtol=rtol):
        print("FEASIBLE")
        return 0
    witness = find_violation(cap, req, rtol=rtol)
    print(f"INFEASIBLE witness p = {_fmt(witness / p_fac)} {args.power_unit}")
    return 1


def cmd_simulate(args: argparse.Namespace, rtol: float) -> int:
    fleet = fio.read_fleet(args.fleet, tolerance=rtol)
    signal = fio.read_signal(args.signal)
    traj = simulate(fleet, signal, policy=args.policy, halt_on_failure=args.halt_on_failure)
    t_fac = fio.TIME_UNITS[args.time_unit]
    e_unit = "kWh" if args.power_unit == "kW" else ("MWh" if args.power_unit == "MW" else "J")
    e_fac = fio.ENERGY_UNITS[e_unit]
    print(f"policy = {traj.policy}")
    print(f"delivered = {_fmt(traj.delivered_energy() / e_fac)} {e_unit}")
    if math.isinf(traj.time_to_failure):
        print("TTF = inf")
    else:
        print(f"TTF = {_fmt(traj.time_to_failure / t_fac)} {args.time_unit}")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fio.write_trajectory(fh, traj, args.time_unit, args.power_unit)
    return 0 if math.isinf(traj.time_to_failure) else 1


def cmd_pulse(args: argparse.Namespace, rtol: float) -> int:
    fleet = fio.read_fleet(args.fleet, tolerance=rtol)
    magnitude = max_pulse(fleet, args.duration)
    p_fac = fio.POWER_UNITS[args.power_unit]
    print(f"max pulse = {_fmt(magnitude / p_fac)} {args.power_unit}")
    return 0


def cmd_ramp(args: argparse.Namespace, rtol: float) -> int:
    fleet = fio.read_fleet(args.fleet, tolerance=rtol)
    duration = max_ramp(fleet, args.gradient, rtol=rtol)
    t_fac = fio.TIME_UNITS[args.time_unit]
    print(f"max ramp duration = {_fmt(duration / t_fac)} {args.time_unit}")
    return 0


def cmd_compare(args: argparse.Namespace, rtol: float) -> int:
    fleet_a = fio.read_fleet(args.fleet_a, tolerance=rtol)
    fleet_b = fio.read_fleet(args.fleet_b, tolerance=rtol)
    verdict = compare_fleets(fleet_a, fleet_b, rtol=rtol)
    p_fac = fio.POWER_UNITS[args.power_unit]
    word = {
        "equivalent": "EQUIVALENT",
        "a_dominates": "DOMINATES",
        "b_dominates": "DOMINATED",
        "incomparable": "INCOMPARABLE",
    }[verdict.relation]
    if verdict.witness_p is None:
        print(word)
    else:
        print(f"{word} witness p = {_fmt(verdict.witness_p / p_fac)} {args.power_unit}")
    return 0


def cmd_truncate(args: argparse.Namespace, rtol: float) -> int:
    fleet = fio.read_fleet(args.fleet, tolerance=rtol)
    signal = fio.read_signal(args.signal)
    t_star = max_feasible_truncation(fleet, signal)
    t_fac = fio.TIME_UNITS[args.time_unit]
    print(f"max feasible truncation = {_fmt(t_star / t_fac)} {args.time_unit}")
    return 0


def _montecarlo_config(args: argparse.Namespace, rtol: float):
    """Sniff the input: a fleet file pins the fleet, a scenario file draws it."""
    import json

    with open(args.input, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise FlexcapError(f"{args.input}: top level must be a JSON object")
    if "device_count" in raw:
        allowed = {f.name for f in ScenarioConfig.__dataclass_fields__.values()}
        unknown = sorted(set(raw) - allowed)
        if unknown:
            raise FlexcapError(f"{args.input}: unknown scenario keys {unknown}")
        missing = sorted(allowed - set(raw) - {"seed"})
        if missing:
            raise FlexcapError(f"{args.input}: missing scenario keys {missing}")
        seed = args.seed if args.seed is not None else int(raw.get("seed", 0))
        config = ScenarioConfig(
            device_count=raw["device_count"],
            ttg_hours=tuple(raw["ttg_hours"]),
            power_kw=tuple(raw["power_kw"]),
            request_mean_mw=raw["request_mean_mw"],
            request_sd_mw=raw["request_sd_mw"],
            interval_hours=raw["interval_hours"],
            horizon_hours=raw["horizon_hours"],
            seed=seed,
        )
        return None, config
    if "devices" in raw:
        for name in ("request_mean", "request_sd", "interval", "horizon"):
            if getattr(args, name) is None:
                raise FlexcapError(
                    f"--{name.replace('_', '-')} is required with a fleet file input")
        fleet = fio.read_fleet(args.input, tolerance=rtol)
        config = ScenarioConfig(
            device_count=fleet.size,
            ttg_hours=(0.0, 1.0),
            power_kw=(0.0, 1.0),
            request_mean_mw=args.request_mean,
            request_sd_mw=args.request_sd,
            interval_hours=args.interval,
            horizon_hours=args.horizon,
            seed=args.seed if args.seed is not None else 0,
        )
        return fleet, config
    raise FlexcapError(
        f'{args.input}: expected a fleet file ("devices") or scenario file ("device_count")')


def cmd_montecarlo(args: argparse.Namespace, rtol: float) -> int:
    from .services import generate_scenario

    fleet, config = _montecarlo_config(args, rtol)
    if fleet is None:
        fleet, _ = generate_scenario(config, index=0, tolerance=rtol)
    est = feasibility_probability(fleet, config, args.samples,
                                  workers=args.workers, rtol=rtol)
    print(f"samples = {est.samples}")
    print(f"feasible = {est.feasible}")
    print(f"probability = {est.probability:.6f}")
    print(f"wilson95 = [{est.ci_low:.6f}, {est.ci_high:.6f}]")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flexcap",
        description="Aggregate flexibility analysis for discharge-only storage fleets.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capacity", help="capacity curve breakpoints, intercepts, gap")
    p.add_argument("fleet", help="fleet JSON file")
    p.add_argument("--clusters", type=int, default=None, metavar="K",
                   help="report the K-cluster lower bound instead of the exact curve")
    p.add_argument("--out", default=None, metavar="CSV", help="write breakpoints as CSV")
    p.add_argument("--svg", default=None, metavar="SVG",
                   help="render the curve (requires matplotlib)")
    _unit_args(p, power=True, energy=True)
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("feasible", help="check a request against the capacity curve")
    p.add_argument("fleet", help="fleet JSON file")
    p.add_argument("signal", help="signal CSV file")
    p.add_argument("--svg", default=None, metavar="SVG",
                   help="render capacity and request curves (requires matplotlib)")
    _unit_args(p, power=True)
    p.set_defaults(func=cmd_feasible)

    p = sub.add_parser("simulate", help="run a dispatch policy against a request")
    p.add_argument("fleet", help="fleet JSON file")
    p.add_argument("signal", help="signal CSV file")
    p.add_argument("--policy", default="op", choices=("op", "lpf", "pop"))
    p.add_argument("--halt-on-failure", action="store_true",
                   help="freeze dispatch at the first deficit instead of best effort")
    p.add_argument("--out", default=None, metavar="CSV", help="write the trajectory as CSV")
    _unit_args(p, power=True, time=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pulse", help="largest feasible constant pulse of a given duration")
    p.add_argument("fleet", help="fleet JSON file")
    p.add_argument("--duration", required=True, type=_parse_duration,
                   help="pulse length, e.g. 5h or 900s (bare number = hours)")
    _unit_args(p, power=True)
    p.set_defaults(func=cmd_pulse)

    p = sub.add_parser("ramp", help="longest feasible ramp from zero at a given gradient")
    p.add_argument("fleet", help="fleet JSON file")
    p.add_argument("--gradient", required=True, type=_parse_gradient,
                   help="ramp slope, e.g. 2kW/h (bare number = kW/h)")
    _unit_args(p, time=True)
    p.set_defaults(func=cmd_ramp)

    p = sub.add_parser("compare", help="order two fleets by capacity dominance")
    p.add_argument("fleet_a", help="fleet JSON file")
    p.add_argument("fleet_b", help="fleet JSON file")
    _unit_args(p, power=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("truncate", help="longest feasible prefix of a request")
    p.add_argument("fleet", help="fleet JSON file")
    p.add_argument("signal", help="signal CSV file")
    _unit_args(p, time=True)
    p.set_defaults(func=cmd_truncate)

    p = sub.add_parser("montecarlo", help="feasibility probability over random requests")
    p.add_argument("input", help="fleet JSON file or scenario JSON file")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None,
                   help="master seed (overrides a scenario file's seed; default 0)")
    p.add_argument("--workers", type=int, default=None,
                   help="process count for the sweep (results do not depend on it)")
    p.add_argument("--request-mean", type=float, default=None, metavar="MW",
                   help="mean request level, MW (fleet file input only)")
    p.add_argument("--request-sd", type=float, default=None, metavar="MW",
                   help="request standard deviation, MW (fleet file input only)")
    p.add_argument("--interval", type=float, default=None, metavar="H",
                   help="request step width, hours (fleet file input only)")
    p.add_argument("--horizon", type=float, default=None, metavar="H",
                   help="request horizon, hours (fleet file input only)")
    p.set_defaults(func=cmd_montecarlo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        rtol = _tolerance_from_env()
        return args.func(args, rtol)
    except FlexcapError as exc:
        print(f"flexcap: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"flexcap: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"flexcap: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
