class UnitRootMDPError(Exception):
    """Base exception for all unitrootmdp errors."""

    pass


class ConfigurationError(UnitRootMDPError, ValueError):
    """Exception raised when an experiment or model is configured inconsistently."""

    pass


class DegenerateSampleError(UnitRootMDPError):
    """Exception raised when an estimator's denominator vanishes on a sample."""

    pass


class HistoryRangeError(UnitRootMDPError, IndexError):
    """Exception raised when a path does not retain the noise history a query needs."""

    pass


class ScheduleInvalidError(UnitRootMDPError, ValueError):
    """Exception raised when a schedule violates a growth condition."""

    pass


class DegenerateRateError(UnitRootMDPError, ValueError):
    """Exception raised when linear-combination coefficients sum to zero."""

    pass


class EnumerationGuardError(UnitRootMDPError):
    """Exception raised when exhaustive enumeration would exceed the size guard."""

    pass


class InfeasibleBlockingError(UnitRootMDPError):
    """Exception raised when no super-block factor satisfies the blocking condition."""

    pass


class SequenceTooShortError(UnitRootMDPError, ValueError):
    """Exception raised when a sequence is shorter than one super-block."""

    pass


class InconclusiveError(UnitRootMDPError):
    """Exception raised when a Monte Carlo budget cannot resolve a condition."""

    pass
