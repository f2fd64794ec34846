"""Exception types shared across the package."""


class PertboundError(Exception):
    """Base class for all errors raised by pertbound."""


class ConfigurationError(PertboundError, ValueError):
    """Invalid model or run configuration."""


class SingularResolventError(PertboundError, ArithmeticError):
    """``z`` sits on (or too close to) an unperturbed energy in the high subspace."""

    def __init__(self, message, combination=None, distance=None):
        super().__init__(message)
        self.combination = combination
        self.distance = distance


class ArityError(PertboundError, ValueError):
    """A partition has more parts than there are variables."""


class CorruptStateError(PertboundError, RuntimeError):
    """Walk tuple bookkeeping is internally inconsistent."""


class AutomatonLogicError(PertboundError, RuntimeError):
    """An automaton phase was invoked in a state it does not support."""


class UnsupportedOrderError(PertboundError, ValueError):
    pass


class SizeGuardError(PertboundError, ValueError):
    """An exponential-cost reference computation exceeds its size guard."""


class DegeneracyAmbiguousError(PertboundError, ValueError):
    """Eigenvalues cannot be grouped into levels unambiguously."""
