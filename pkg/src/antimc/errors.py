class DomainError(ValueError):
    """Input outside the domain of an operation (bad shape, bad index, ...)."""


class NumericError(ArithmeticError):
    """A numerical procedure produced or received unusable values."""


class ConfigError(ValueError):
    """Invalid run configuration; ``field`` names the offending entry."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class UsageError(RuntimeError):
    """API misuse, e.g. drawing from a stream that has already been split."""
