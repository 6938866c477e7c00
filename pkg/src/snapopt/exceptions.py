"""Exception hierarchy shared across the package."""


class SnapError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(SnapError, ValueError):
    """A configuration value is missing, malformed, or inconsistent.

    The message names the offending field.
    """


class DomainError(SnapError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class PrecisionError(SnapError, RuntimeError):
    """A numerical self-check failed (step-halving audit, positivity, trace)."""


class DegenerateStateError(SnapError, ValueError):
    """A quantity (typically a phase) is undefined for the given state."""


class DivergenceError(SnapError, RuntimeError):
    """A pulse-parameter update left the physical parameter range."""


class ContractError(SnapError, ValueError):
    """An input violates a documented precondition of the receiving routine."""
