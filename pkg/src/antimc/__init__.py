"""Antithetic Monte Carlo with annealed orthogonal matrices."""

__version__ = "0.1.0"

from .errors import ConfigError, DomainError, NumericError, UsageError  # noqa: E402
from .sampling import GaussianStream  # noqa: E402

__all__ = ["ConfigError", "DomainError", "GaussianStream", "NumericError", "UsageError", "__version__"]
