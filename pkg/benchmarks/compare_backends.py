#!/usr/bin/env python3
"""Time the pure-Python simulation kernels against the compiled core.

Both kernel sets are imported directly, bypassing the FLEXCAP_BACKEND
selection, so one process can race them on identical inputs.  Requests
are drawn near the fleet's aggregate rating so the event queue stays
busy; record=False isolates kernel cost from trajectory assembly.

Usage:
    python benchmarks/compare_backends.py --sizes 10 100 1000 --repeats 5
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from flexcap import _sim_py

try:
    from flexcap import _sim_cy
except ImportError:
    _sim_cy = None


def build_instance(n, segments, seed):
    rng = np.random.default_rng(seed)
    ttg = np.sort(np.exp(rng.uniform(2, 9, n)))[::-1]
    power = np.exp(rng.uniform(-1, 4, n))
    energy = ttg * power
    total = float(power.sum())
    horizon = float(ttg[0] * 1.2)
    dt = horizon / segments
    breakpoints = [i * dt for i in range(segments)]
    values = [float(total * rng.uniform(0.2, 1.05)) for _ in range(segments)]
    return {
        "x0": [float(t) for t in ttg],
        "w0": [float(p) for p in power],
        "e0": [float(e) for e in energy],
        "pmax": [float(p) for p in power],
        "order": sorted(range(n), key=lambda i: (power[i], i)),
        "breakpoints": breakpoints,
        "values": values,
        "horizon": horizon,
    }


def run_once(mod, policy, inst):
    if policy == "op":
        return mod.op_simulate(
            inst["x0"], inst["w0"], inst["breakpoints"], inst["values"],
            inst["horizon"], False, False,
        )
    if policy == "lpf":
        return mod.lpf_simulate(
            inst["e0"], inst["pmax"], inst["order"],
            inst["breakpoints"], inst["values"], inst["horizon"], False, False,
        )
    return mod.pop_simulate(
        inst["e0"], inst["pmax"], inst["breakpoints"], inst["values"],
        inst["horizon"], False, False,
    )


def best_of(mod, policy, inst, repeats):
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        run_once(mod, policy, inst)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[10, 100, 1000, 5000])
    parser.add_argument("--segments", type=int, default=96)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if _sim_cy is None:
        print("compiled core not built; timing pure kernels only")

    header = f"{'devices':>8} {'policy':>7} {'python':>12}"
    if _sim_cy is not None:
        header += f" {'compiled':>12} {'speedup':>8}"
    print(header)

    for n in args.sizes:
        inst = build_instance(n, args.segments, args.seed)
        for policy in ("op", "lpf", "pop"):
            run_once(_sim_py, policy, inst)  # warm up
            t_py = best_of(_sim_py, policy, inst, args.repeats)
            line = f"{n:>8} {policy:>7} {t_py * 1e3:>10.3f}ms"
            if _sim_cy is not None:
                run_once(_sim_cy, policy, inst)
                t_cy = best_of(_sim_cy, policy, inst, args.repeats)
                match = (
                    run_once(_sim_py, policy, inst)["ttf"]
                    == run_once(_sim_cy, policy, inst)["ttf"]
                )
                line += f" {t_cy * 1e3:>10.3f}ms {t_py / t_cy:>7.1f}x"
                if not match:
                    line += "  TTF MISMATCH"
            print(line)


if __name__ == "__main__":
    main()
