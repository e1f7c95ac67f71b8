"""Exception types shared across the package."""


class InvalidStateError(RuntimeError):
    """An operation was applied to an object in the wrong state."""


class DepthExceededError(RuntimeError):
    """An expansion would push a node past the tree's depth bound."""


class NodeNotFoundError(LookupError):
    """The referenced node is not part of the tree."""


class BranchingExceededError(ValueError):
    """More children than the fixed action-space width allows."""


class NoActionError(ValueError):
    """Action selection was asked to choose among zero children."""


class NumericFaultError(ArithmeticError):
    """Network parameters or outputs stopped being finite."""


class InvalidPathError(ValueError):
    """A query path does not start at the backend's root."""


class TraceFormatError(ValueError):
    """A trace file is malformed; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InsufficientSamplesError(RuntimeError):
    """Monte Carlo estimation had no conditioned samples to work with."""


class DegenerateInstanceError(RuntimeError):
    """Every extension of the conditioning prefix is correct (p1 = 0)."""


class HypothesisViolatedError(ValueError):
    """The conditioning node does not satisfy x > y >= 1."""


class ConfigError(ValueError):
    """A run configuration file or override is invalid."""
