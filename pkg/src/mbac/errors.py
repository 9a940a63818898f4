"""Exception types raised across the package."""


class ConfigError(ValueError):
    """Invalid experiment or component configuration."""

    def __init__(self, key, expected, value=None):
        self.key = key
        self.expected = expected
        self.value = value
        msg = f"{key}: expected {expected}"
        if value is not None:
            msg += f", got {value!r}"
        super().__init__(msg)


class BookkeepingError(RuntimeError):
    """Admitted-set bookkeeping was asked to do something inconsistent."""


class OutOfIntervalError(ValueError):
    """A flow was queried outside its active lifetime."""
