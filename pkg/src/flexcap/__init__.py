"""Aggregate flexibility analysis for discharge-only storage fleets.

Core objects: Device/FleetState (ratings and remaining energy), StepSignal
(piecewise-constant power request), EPCurve (energy available above each
power threshold).  capacity_curve gives the exact feasibility frontier;
is_feasible checks a request against it; simulate replays a dispatch
policy event by event.  services adds pulse/ramp sizing, fleet comparison
and Monte Carlo feasibility estimates; oracle holds slow reference
checkers used to validate the fast paths.

BACKEND names the simulation kernel in use: "compiled" when the optional
accelerator module is built, "python" otherwise.  Set FLEXCAP_BACKEND=py
or =cy to force one.
"""

from ._backend import BACKEND
from .dispatch import (
    POLICIES,
    Trajectory,
    lpf_dispatch,
    max_available_power,
    optimal_dispatch,
    pop_dispatch,
    simulate,
)
from .epcurve import (
    EPCurve,
    capacity_curve,
    clustered_capacity_lower_bound,
    dominance_margin,
    dominates,
    ep_transform,
    find_violation,
    flexibility_gap,
    is_feasible,
    max_flexibility_line,
    worst_case_reference,
)
from .errors import (
    EmptyFleet,
    FleetFileError,
    FlexcapError,
    InvalidClusterCount,
    InvalidConfig,
    InvalidDevice,
    InvalidDuration,
    InvalidGradient,
    InvalidPartition,
    InvalidRequest,
    InvalidSignal,
    InvalidStep,
    InvalidWindow,
    OracleMismatch,
    SignalFileError,
)
from .model import (
    DEFAULT_RTOL,
    Device,
    DispatchResult,
    FleetState,
    StepSignal,
    make_fleet,
    permute_segments,
    truncate,
)
from .oracle import (
    CrossValidationReport,
    OracleVerdict,
    brute_force_feasible,
    cross_validate,
    flow_feasible,
)
from .services import (
    ComparisonVerdict,
    FeasibilityEstimate,
    ScenarioConfig,
    compare_fleets,
    feasibility_probability,
    generate_scenario,
    max_feasible_truncation,
    max_pulse,
    max_ramp,
    time_to_failure,
)

__version__ = "1.0.0"

__all__ = [
    "BACKEND",
    "DEFAULT_RTOL",
    "POLICIES",
    "ComparisonVerdict",
    "CrossValidationReport",
    "Device",
    "DispatchResult",
    "EPCurve",
    "EmptyFleet",
    "FeasibilityEstimate",
    "FleetFileError",
    "FleetState",
    "FlexcapError",
    "InvalidClusterCount",
    "InvalidConfig",
    "InvalidDevice",
    "InvalidDuration",
    "InvalidGradient",
    "InvalidPartition",
    "InvalidRequest",
    "InvalidSignal",
    "InvalidStep",
    "InvalidWindow",
    "OracleMismatch",
    "OracleVerdict",
    "ScenarioConfig",
    "SignalFileError",
    "StepSignal",
    "Trajectory",
    "brute_force_feasible",
    "capacity_curve",
    "clustered_capacity_lower_bound",
    "compare_fleets",
    "cross_validate",
    "dominance_margin",
    "dominates",
    "ep_transform",
    "feasibility_probability",
    "find_violation",
    "flexibility_gap",
    "flow_feasible",
    "generate_scenario",
    "is_feasible",
    "lpf_dispatch",
    "make_fleet",
    "max_available_power",
    "max_feasible_truncation",
    "max_flexibility_line",
    "max_pulse",
    "max_ramp",
    "optimal_dispatch",
    "permute_segments",
    "pop_dispatch",
    "simulate",
    "time_to_failure",
    "truncate",
    "worst_case_reference",
    "__version__",
]
