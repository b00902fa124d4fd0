"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid dimensions, counts or configuration values."""


class EncoderError(RuntimeError):
    """An encoder failed to converge; ``best`` holds the best iterate found."""

    def __init__(self, message, best=None, column=None):
        super().__init__(message)
        self.best = best
        self.column = column


class InitializationError(RuntimeError):
    """Not enough usable examples to initialize a dictionary."""
