"""Exception hierarchy.

Validation problems derive from ``ValueError`` (CLI exit status 1); numerical
failures derive from ``RuntimeError`` (CLI exit status 2).
"""


class ConfigurationError(ValueError):
    """Invalid physical input or configuration (unknown species, bad ranges)."""


class DomainError(ValueError):
    """Argument outside the domain of an operation (e.g. t outside [0, T])."""


class ContractError(ValueError):
    """An operation was called on inputs that violate its precondition."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to reach the requested accuracy."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class DesignError(NumericalError):
    """The linear system defining a protocol could not be solved reliably."""

    def __init__(self, message, condition_number=None):
        super().__init__(message, estimate=condition_number)
        self.condition_number = condition_number


class IntegrationError(NumericalError):
    """Classical trajectory integration failed; carries the last state."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
