"""Exception types shared across the toolkit."""


class DomainError(ValueError):
    """An input lies outside the physically meaningful domain."""


class IntegrationError(ArithmeticError):
    """A time integration produced non-finite values."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""
