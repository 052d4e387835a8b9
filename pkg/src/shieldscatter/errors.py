"""Exception hierarchy shared by every stage of the pipeline."""


class ShieldScatterError(Exception):
    """Base class for all package errors."""


class ConfigError(ShieldScatterError, ValueError):
    """Invalid or inconsistent configuration."""


class DomainError(ShieldScatterError, ValueError):
    """An argument lies outside the domain of an operation."""


class NoBackscatterDetected(ShieldScatterError):
    """The trace carries no recoverable backscatter burst."""


class SegmentTooShort(ShieldScatterError):
    def __init__(self, length: int, required: int, what: str = "segment"):
        self.length = length
        self.required = required
        super().__init__(f"{what} has {length} samples, need at least {required}")


class SolverError(ShieldScatterError):
    def __init__(self, message: str, violation: float):
        self.violation = violation
        super().__init__(f"{message} (final KKT violation {violation:.3e})")


class ScenarioError(ShieldScatterError):
    """A scenario could not be evaluated, e.g. a message failed to segment."""
