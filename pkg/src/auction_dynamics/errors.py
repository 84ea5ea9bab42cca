class ConfigError(ValueError):
    """Invalid construction parameters or configuration."""


class PreconditionError(ValueError):
    """An operation was applied to an input that does not satisfy its requirements."""


class MonotonicityError(ValueError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class BudgetExceeded(RuntimeError):
    """Exhaustive scan would exceed the configured work budget."""
