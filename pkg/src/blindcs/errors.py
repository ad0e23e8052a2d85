"""Exception hierarchy shared by every module."""


class BCSError(Exception):
    """Base class for all errors raised by blindcs."""


class DimensionError(BCSError, ValueError):
    """Invalid or inconsistent problem dimensions / array shapes."""


class DomainError(BCSError, ValueError):
    """A closed-form bound was evaluated outside its domain."""


class BudgetError(BCSError, RuntimeError):
    """An exhaustive enumeration or dense construction exceeds its budget."""


class SingularityError(BCSError, ValueError):
    """A matrix required to have full rank does not."""


class DegenerateError(BCSError, ValueError):
    """Zero-norm columns, empty clusters and similar degenerate inputs."""


class PreconditionError(BCSError, ValueError):
    """An operation was called outside the regime where it is valid."""


class ConfigError(BCSError, ValueError):
    """Malformed experiment configuration."""
