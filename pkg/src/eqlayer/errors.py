"""Exception types shared across the solver."""


class EqlayerError(Exception):
    """Base class for all solver errors."""


class SpecificationError(EqlayerError):
    """Problem description violates a structural constraint."""


class ConfigError(EqlayerError):
    """Malformed configuration file.

    Carries the 1-based line number of the offending entry (0 when the
    problem is not tied to a single line).
    """

    def __init__(self, message, line=0):
        super().__init__(message)
        self.line = line


class AssemblyError(EqlayerError):
    """Discrete operator cannot be assembled (names the offending node/row)."""


class SingularSystemError(EqlayerError):
    """Sparse factorization failed; the assembled system is singular."""


class NoConvergenceError(EqlayerError):
    """Iterative solve did not reach the requested tolerance.

    ``residuals`` holds the recorded residual history.
    """

    def __init__(self, message, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)


class PreconditionError(EqlayerError):
    """Operation invoked on inputs violating its stated precondition."""
