"""
Error hierarchy for the Polya sum process toolkit
"""


class PolyaError(Exception):
    """Base class for every error raised by the toolkit"""


class DomainError(PolyaError, ValueError):
    """Parameters or conditions outside their legal domain"""


class EnumerationBoundError(DomainError):
    """Partition enumeration requested beyond the configured bound"""


class InfeasibleStatisticsError(DomainError):
    """Limit statistics (u, v) outside {u > v > 0} and not both zero"""


class ConditionMismatchError(DomainError):
    """Ensemble condition does not match the window or the outside configuration"""


class ConvergenceError(PolyaError, ArithmeticError):
    """A numeric solver failed to converge"""


class DegenerateTestError(PolyaError):
    """A statistical test has nothing to compare (e.g. a single pooled cell)"""


class IdentityCheckError(PolyaError, AssertionError):
    """An exact identity that must hold did not"""


class ConfigError(PolyaError):
    """Experiment configuration could not be parsed or validated"""
