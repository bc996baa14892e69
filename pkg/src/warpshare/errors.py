"""Exception hierarchy shared by every warpshare module."""


class WarpshareError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(WarpshareError):
    """Bad user input: configuration, workload, assembly, CLI values."""


class ZeroBlocksFit(ValidationError):
    pass


class InvalidThreshold(ValidationError):
    pass


class InvalidKernel(ValidationError):
    def __init__(self, reasons):
        if isinstance(reasons, str):
            reasons = [reasons]
        self.reasons = list(reasons)
        super().__init__("; ".join(self.reasons))


class ConfigError(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, line=0, column=0):
        self.line = line
        self.column = column
        super().__init__(f"{line}:{column}: {message}")


class IndexOutOfRange(WarpshareError):
    pass


class ProtocolViolation(WarpshareError):
    pass


class SimulatorInvariantViolation(WarpshareError):
    """Internal consistency check failed inside the simulator."""


class CycleLimitExceeded(SimulatorInvariantViolation):
    """The watchdog fired; on valid inputs this indicates a liveness bug."""
