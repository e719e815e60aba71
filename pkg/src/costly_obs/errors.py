"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    pass


class InvalidActionError(ValueError):
    pass


class ProtocolError(RuntimeError):
    pass


class ShapeError(ValueError):
    pass


class ParseError(ValueError):
    """Malformed text input; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DatasetError(ValueError):
    pass


class DegenerateInputError(ValueError):
    pass
