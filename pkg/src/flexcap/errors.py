"""Exception types raised across the package.

Every error is a FlexcapError so callers can catch the whole family; the
CLI maps them to exit code 2.
"""


class FlexcapError(Exception):
    """Base class for all flexcap errors."""


class EmptyFleet(FlexcapError):
    """A fleet operation received zero devices."""


class InvalidDevice(FlexcapError):
    """Device parameters out of range (p_max <= 0, energy < 0, ...)."""


class InvalidSignal(FlexcapError):
    """Step signal breakpoints/values violate the construction rules."""


class InvalidWindow(FlexcapError):
    """Truncation window is not 0 <= t0 <= t1 <= horizon."""


class InvalidPartition(FlexcapError):
    """Cut times or part order do not describe a permutation of the signal."""


class InvalidRequest(FlexcapError):
    """Dispatch request is negative or not finite."""


class InvalidDuration(FlexcapError):
    """Service duration must be positive and finite."""


class InvalidGradient(FlexcapError):
    """Ramp gradient must be positive and finite."""


class InvalidClusterCount(FlexcapError):
    """Cluster count for the coarsened capacity bound must be >= 1."""


class InvalidStep(FlexcapError):
    """Oracle step must be positive and finite."""


class InvalidConfig(FlexcapError):
    """Scenario configuration fields out of range."""


class OracleMismatch(FlexcapError):
    """Transform and oracle disagree outside the declared tolerance band."""


class FleetFileError(FlexcapError):
    """Fleet file cannot be parsed; carries the offending line when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:" if line is None else f"{path}:{line}:"
        super().__init__(f"{prefix} {message}".strip())


class SignalFileError(FlexcapError):
    """Signal file cannot be parsed; carries the offending line when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:" if line is None else f"{path}:{line}:"
        super().__init__(f"{prefix} {message}".strip())
