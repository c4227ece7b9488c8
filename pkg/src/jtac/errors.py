"""Exception hierarchy shared by every jtac module."""


class JTACError(Exception):
    """Base class for all errors raised by jtac."""


class DomainError(JTACError, ValueError):
    """Argument outside the mathematical domain of a function."""


class ConvergenceError(JTACError, ArithmeticError):
    """An iterative method ran out of terms or iterations."""

    def __init__(self, message, *, iterations=None, last_value=None):
        super().__init__(message)
        self.iterations = iterations
        self.last_value = last_value


class InfeasibleConstraintError(JTACError, ValueError):
    """The input constraints admit no solution for the requested quantity."""


class RootNotBracketedError(JTACError, ArithmeticError):
    """A bracketing root solver could not find a sign change."""

    def __init__(self, message, *, brackets=()):
        super().__init__(message)
        self.brackets = tuple(brackets)


class DegenerateVarianceError(JTACError, ValueError):
    """A Gaussian kernel was requested with zero variance."""


class NumericalInstabilityError(JTACError, ArithmeticError):
    """A numerical procedure produced untrustworthy values."""


class AlphabetSizeError(JTACError, ValueError):
    """A discretized channel would exceed the configured alphabet cap."""


class ConfigError(JTACError, ValueError):
    """An experiment configuration is malformed or inconsistent."""
