"""Exception hierarchy shared across the library and the CLI."""


class DogcError(Exception):
    """Base class for all library errors."""


class DataValidationError(DogcError):
    """Numeric input violates a precondition (non-finite values, bad shapes)."""


class DatasetParseError(DogcError):
    """A dataset file could not be parsed; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(DogcError):
    """An experiment configuration is malformed or inconsistent."""


class SolverError(DogcError):
    """A fit could not be carried out on the given problem instance."""
