"""Exception hierarchy shared by all qspde modules."""


class QSpdeError(Exception):
    """Base class for every error raised by qspde."""


class InvalidInputError(QSpdeError, ValueError):
    """Argument has the wrong shape, is non-finite or is out of range."""


class DomainError(QSpdeError, ValueError):
    """A field left the domain of a pointwise map (e.g. nonpositive density).

    ``index`` is the first offending collocation index, when known.
    """

    def __init__(self, message, index=None, value=None):
        super().__init__(message)
        self.index = index
        self.value = value


class StepRejected(QSpdeError):
    """A time step was refused; ``diagnostics`` holds the measured quantities."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ConfigError(QSpdeError, ValueError):
    """Malformed or inconsistent configuration."""
