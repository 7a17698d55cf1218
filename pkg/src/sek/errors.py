"""Exception hierarchy shared across the package."""


class SekError(Exception):
    """Base class for all errors raised by :mod:`sek`."""


class ArgumentError(SekError, ValueError):
    """Invalid input: bad label, dimension mismatch, malformed data."""


class NotPSDError(ArgumentError):
    """An operator required to be positive semi-definite is not."""


class CapacityError(SekError):
    """A constructed matrix would exceed the configured dimension cap."""


class NumericalFailure(SekError):
    """An iterative routine failed to converge or produced unusable output."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class RelationViolation(SekError):
    """A checked inequality failed beyond tolerance; ``replay_path`` holds the instance."""

    def __init__(self, message, replay_path=None, report=None):
        super().__init__(message)
        self.replay_path = replay_path
        self.report = report
