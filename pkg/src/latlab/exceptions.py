class LatlabError(Exception):
    """Base class for errors raised by latlab."""


class ConfigError(LatlabError, ValueError):
    """Malformed map family, domain, or experiment configuration."""


class ResourceError(LatlabError):
    """A lattice enumeration would exceed the configured point cap."""


class PreconditionError(LatlabError, ValueError):
    """An operation was called outside its documented precondition."""


class InvariantViolation(LatlabError, AssertionError):
    """Two characterizations that must agree did not (indicates a bug)."""


class DivergenceError(LatlabError):
    """Fixed-point iteration exceeded its step cap.

    ``visited`` holds the orbit prefix as lattice indices.
    """

    def __init__(self, message, visited):
        super().__init__(message)
        self.visited = list(visited)
