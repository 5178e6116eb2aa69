"""Exception types raised across the package."""


class InputError(ValueError):
    """Caller supplied arguments that violate a precondition."""


class ParseError(ValueError):
    """A file could not be parsed; ``location`` names the offending row/field."""

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{location}: {message}"
        super().__init__(message)


class NumericError(ArithmeticError):
    """Non-finite intermediate or factorization failure."""

    def __init__(self, message, index=None):
        self.index = index
        if index is not None:
            message = f"{message} (sample {index})"
        super().__init__(message)


class ConvergenceError(RuntimeError):
    """Iteration cap reached; ``state`` holds the best iterate found."""

    def __init__(self, message, state=None):
        self.state = state
        super().__init__(message)
