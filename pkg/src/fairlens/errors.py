"""Exception types shared across the toolkit."""


class FairlensError(Exception):
    pass


class ConfigError(FairlensError):
    """Bad configuration. ``key`` names the offending config entry when known."""

    def __init__(self, message: str, key: str | None = None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class EmptyInputError(FairlensError):
    pass


class ValidationError(FairlensError, ValueError):
    pass


class StructuralError(FairlensError):
    """A process model that cannot be turned into a usable net."""


class NotTested(FairlensError):
    """Raised by a statistical test when too few groups or categories remain."""
