"""Exception types raised by the simulator."""


class ConfigurationError(ValueError):
    """Bad sizes, lengths or parameters handed to a kernel or the harness."""


class CfoDomainError(ValueError):
    """Normalized CFO outside the coarse-compensated range (-1/2, 1/2)."""


class NumericalSingularityError(ArithmeticError):
    """A system matrix that should be positive definite is not."""


class UnderdeterminedError(ValueError):
    """Not enough pilot observations for the requested channel length."""


class CodeConstructionError(ValueError):
    """An LDPC base matrix cannot be lifted into a valid code."""
